import json
import math

import numpy as np
import pytest

from qifcausal.datasets import PairLabel
from qifcausal.errors import InvalidConfig
from qifcausal.evaluation import (
    ExperimentSpec,
    accuracy_ci,
    cross_validate,
    holdout_split,
    report_json,
    run_experiment,
    stratified_kfold,
)
from qifcausal.gbdt import TrainConfig


class TestKFold:
    def test_exact_stratification(self):
        labels = ["a"] * 50 + ["b"] * 50
        for fold in stratified_kfold(labels, 10, 0):
            assert sum(labels[i] == "a" for i in fold) == 5
            assert sum(labels[i] == "b" for i in fold) == 5

    def test_partition(self, rng):
        labels = list(rng.integers(0, 3, 97))
        folds = stratified_kfold(labels, 7, 1)
        everything = np.concatenate(folds)
        assert sorted(everything.tolist()) == list(range(97))

    def test_per_class_counts_differ_by_at_most_one(self, rng):
        labels = list(rng.integers(0, 4, 133))
        folds = stratified_kfold(labels, 10, 2)
        for c in range(4):
            counts = [sum(labels[i] == c for i in f) for f in folds]
            assert max(counts) - min(counts) <= 1
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_deterministic(self):
        labels = [0, 1] * 30
        a, b = stratified_kfold(labels, 5, 9), stratified_kfold(labels, 5, 9)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_too_many_folds(self):
        with pytest.raises(InvalidConfig):
            stratified_kfold([0, 1, 0], 4, 0)

    def test_small_class_warns(self):
        with pytest.warns(UserWarning):
            stratified_kfold([0] * 20 + [1] * 3, 5, 0)


class TestHoldout:
    def test_size_and_partition(self):
        labels = ["a"] * 60 + ["b"] * 40
        train, test = holdout_split(labels, 0.2, 0)
        assert test.size == 20
        assert np.intersect1d(train, test).size == 0
        assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))

    def test_class_ratios(self, rng):
        labels = list(rng.integers(0, 3, 91))
        _, test = holdout_split(labels, 0.2, 4)
        assert test.size == round(0.2 * 91)
        for c in range(3):
            overall = labels.count(c) * test.size / len(labels)
            assert abs(sum(labels[i] == c for i in test) - overall) <= 1

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1, 1.5])
    def test_bad_fraction(self, f):
        with pytest.raises(InvalidConfig):
            holdout_split([0, 1] * 5, f, 0)


class TestCI:
    def test_half(self):
        acc, half = accuracy_ci(50, 100)
        assert acc == 0.5
        assert half == pytest.approx(1.96 * math.sqrt(0.25 / 100), abs=1e-15)
        assert half == pytest.approx(0.098, abs=1e-12)

    @pytest.mark.parametrize("c, n, acc", [(100, 100, 1.0), (0, 10, 0.0)])
    def test_degenerate(self, c, n, acc):
        assert accuracy_ci(c, n) == (acc, 0.0)

    def test_wilson_nonzero_at_boundary(self):
        assert accuracy_ci(10, 10, "wilson")[1] > 0

    def test_errors(self):
        with pytest.raises(InvalidConfig):
            accuracy_ci(0, 0)
        with pytest.raises(InvalidConfig):
            accuracy_ci(5, 4)


def test_cross_validate_pools_folds(rng):
    X = rng.normal(size=(120, 3))
    y = (X[:, 0] > 0).astype(int)
    res = cross_validate(X, y, 6, TrainConfig(n_trees=10), 0)
    assert res.mean_accuracy == pytest.approx(sum(res.fold_correct) / sum(res.fold_total), abs=1e-12)
    assert len(res.fold_accuracies) == 6
    assert res.mean_accuracy > 0.9


def small_spec(**kw):
    base = {
        "dataset": {"source": "synthetic", "pairs": 80, "samples": 200, "classes": 2},
        "task": "2class",
        "protocol": "cv",
        "folds": 4,
        "seed": 1,
        "training": {"n_trees": 20},
    }
    base.update(kw)
    return ExperimentSpec.from_dict(base)


class TestRunExperiment:
    def test_report_schema(self):
        r = run_experiment(small_spec(protocol="cv+holdout"))
        assert r["schema_version"] == 1
        assert len(r["cv"]["fold_accuracies"]) == 4
        assert 0 <= r["cv"]["mean_accuracy"] <= 1 and r["cv"]["ci_half_width"] >= 0
        assert r["cv"]["mean_accuracy"] == pytest.approx(sum(r["cv"]["fold_correct"]) / sum(r["cv"]["fold_totals"]), abs=1e-12)
        cm = np.array(r["holdout"]["confusion_matrix"])
        assert cm.sum() == r["holdout"]["total"] == 16
        assert len(r["feature_importance"]) == 21
        assert r["selected_bins"] is None

    def test_confusion_rows_match_support(self):
        r = run_experiment(small_spec())
        cm = np.array(r["cv"]["confusion_matrix"])
        assert cm.sum(axis=1).tolist() == [r["dataset"]["class_counts"][c] for c in r["classes"]]

    def test_every_field_present_for_each_protocol(self):
        keys = None
        for protocol in ("cv", "holdout", "cv+holdout"):
            r = run_experiment(small_spec(protocol=protocol))
            keys = keys or set(r)
            assert set(r) == keys
        assert run_experiment(small_spec(protocol="holdout"))["cv"] is None
        assert run_experiment(small_spec(protocol="cv"))["holdout"] is None

    def test_ten_folds(self):
        r = run_experiment(small_spec(folds=10))
        assert len(r["cv"]["fold_accuracies"]) == 10

    def test_deterministic_json(self):
        assert report_json(run_experiment(small_spec())) == report_json(run_experiment(small_spec()))

    def test_four_class_on_two_labels_rejected(self):
        with pytest.raises(InvalidConfig):
            run_experiment(small_spec(task="4class"))

    def test_four_class(self):
        spec = small_spec(task="4class", dataset={"source": "synthetic", "pairs": 80, "samples": 200, "classes": 4})
        r = run_experiment(spec)
        assert r["classes"] == [lab.value for lab in PairLabel]

    def test_bin_tuning_inside_training_folds(self):
        spec = small_spec(protocol="cv+holdout", bin_candidates=[4, 8], bin_cv_folds=2, folds=3,
                          extraction={"numeric_estimator": "binning"})
        r = run_experiment(spec)
        assert r["selected_bins"] in (4, 8)
        assert len(r["cv"]["fold_selected_bins"]) == 3

    def test_outputs(self, tmp_path):
        spec = small_spec(outputs={"features_csv": str(tmp_path / "f.csv"), "folds_csv": str(tmp_path / "folds.csv"),
                                   "text": str(tmp_path / "r.txt")})
        run_experiment(spec)
        assert (tmp_path / "folds.csv").read_text().splitlines()[0] == "fold,correct,total,accuracy"
        assert len((tmp_path / "folds.csv").read_text().splitlines()) == 5
        assert "CV accuracy" in (tmp_path / "r.txt").read_text()
        assert len((tmp_path / "f.csv").read_text().splitlines()) == 81

    def test_spec_validation(self):
        with pytest.raises(InvalidConfig):
            small_spec(protocol="bootstrap")
        with pytest.raises(InvalidConfig):
            ExperimentSpec.from_dict({"dataset": {"source": "synthetic"}, "bogus": 1})

    def test_spec_file_paths_relative_to_spec(self, tmp_path):
        from qifcausal.datasets import generate_synthetic_anm, write_challenge

        write_challenge(generate_synthetic_anm(40, 100, 0), tmp_path / "data")
        (tmp_path / "spec.json").write_text(json.dumps({
            "dataset": {"source": "challenge", "path": "data"}, "protocol": "cv", "folds": 4,
            "training": {"n_trees": 5}}))
        r = run_experiment(ExperimentSpec.from_file(tmp_path / "spec.json"))
        assert r["dataset"]["n_pairs"] == 40
