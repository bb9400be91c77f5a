"""Cross-validation, holdout evaluation and experiment reports.

An experiment is described by a JSON document (see :class:`ExperimentSpec`):

.. code-block:: json

    {
      "dataset": {"source": "synthetic", "pairs": 400, "samples": 500, "classes": 2},
      "task": "2class",
      "protocol": "cv+holdout",
      "folds": 10,
      "holdout_fraction": 0.2,
      "seed": 0,
      "extraction": {"n_bins": 10, "kde_grid": 32},
      "training": {"n_trees": 200, "max_depth": 4},
      "bin_candidates": null,
      "variable_filter": "all",
      "ci_method": "normal",
      "outputs": {"features_csv": null, "folds_csv": null, "text": null}
    }

``dataset.source`` is ``synthetic`` (generated in memory), ``challenge``
(``path`` to a directory with ``pairs.csv``/``targets.csv``, or explicit
``data``/``targets``/``types`` files) or ``tuebingen`` (``path`` to the pair
directory; directions are randomized with the experiment seed).
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import (
    DataSource,
    PairDataset,
    PairLabel,
    generate_synthetic_anm,
    load_challenge,
    load_challenge_dir,
    load_tuebingen,
    randomize_directions,
)
from .errors import InvalidConfig, QIFError
from .features import (
    FEATURE_NAMES,
    ExtractionConfig,
    VariableKind,
    best_bins,
    feature_matrix,
    n_threads,
    write_features_csv,
)
from .gbdt import TrainConfig, fit, predict, ranked_importance

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
Z95 = 1.959963984540054


def _class_order(labels):
    from .gbdt import _label_key

    return sorted(set(labels), key=_label_key)


def stratified_kfold(labels: Sequence, k: int, seed: int) -> list[np.ndarray]:
    """Test-index sets of ``k`` stratified folds.

    Each class is shuffled and dealt round-robin, continuing where the
    previous class stopped, so per-class counts differ by at most one between
    folds and fold sizes stay balanced.
    """
    n = len(labels)
    if k < 2:
        raise InvalidConfig("k must be at least 2")
    if k > n:
        raise InvalidConfig(f"cannot make {k} folds from {n} items")
    rng = np.random.default_rng(seed)
    labels = list(labels)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in _class_order(labels):
        members = np.array([i for i, lab in enumerate(labels) if lab == cls])
        if members.size < k:
            warnings.warn(f"class {getattr(cls, 'value', cls)!r} has {members.size} < {k} members; stratification is best-effort")
        for i in rng.permutation(members):
            folds[cursor % k].append(int(i))
            cursor += 1
    return [np.sort(np.array(f, dtype=np.intp)) for f in folds]


def holdout_split(labels: Sequence, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified ``(train_indices, test_indices)`` with ``round(fraction * n)`` test items."""
    if not 0 < fraction < 1:
        raise InvalidConfig("holdout fraction must lie in (0, 1)")
    labels = list(labels)
    n = len(labels)
    n_test = int(math.floor(fraction * n + 0.5))
    classes = _class_order(labels)
    members = {c: np.array([i for i, lab in enumerate(labels) if lab == c]) for c in classes}
    exact = np.array([fraction * members[c].size for c in classes])
    take = np.floor(exact).astype(int)
    # hand the remaining slots to the largest fractional parts, earlier classes first on ties
    remainder = n_test - int(take.sum())
    for j in sorted(range(len(classes)), key=lambda j: (-(exact[j] - take[j]), j))[:max(remainder, 0)]:
        take[j] += 1
    rng = np.random.default_rng(seed)
    test = []
    for c, t in zip(classes, take):
        test.extend(rng.permutation(members[c])[:t].tolist())
    test_idx = np.sort(np.array(test, dtype=np.intp))
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    return train_idx, test_idx


def accuracy_ci(correct: int, total: int, method: str = "normal") -> tuple[float, float]:
    """Accuracy and the half-width of its 95% interval.

    ``normal`` is ``1.96 * sqrt(p (1 - p) / n)``; ``wilson`` returns the
    half-width of the Wilson score interval (centred on its own midpoint).
    """
    if total < 1:
        raise InvalidConfig("total must be at least 1")
    if not 0 <= correct <= total:
        raise InvalidConfig("correct must lie in [0, total]")
    p = correct / total
    if method == "normal":
        return p, 1.96 * math.sqrt(p * (1 - p) / total)
    if method == "wilson":
        z2 = Z95**2
        return p, Z95 * math.sqrt(p * (1 - p) / total + z2 / (4 * total**2)) / (1 + z2 / total)
    raise InvalidConfig(f"unknown CI method {method!r}")


@dataclass
class CVResult:
    fold_correct: list[int]
    fold_total: list[int]
    predictions: np.ndarray  # out-of-fold label index per item
    selected_bins: list[int] = field(default_factory=list)

    @property
    def fold_accuracies(self) -> list[float]:
        return [c / t for c, t in zip(self.fold_correct, self.fold_total)]

    @property
    def mean_accuracy(self) -> float:
        return sum(self.fold_correct) / sum(self.fold_total)


def _fold_tasks(folds, n):
    for f, test in enumerate(folds):
        train = np.setdiff1d(np.arange(n), test)
        if np.intersect1d(train, test).size:
            raise AssertionError("test index leaked into its own training fold")
        yield f, train, test


def cross_validate(X, labels: Sequence, k: int, cfg: TrainConfig, seed: int, threads: int = 1,
                   feature_source=None) -> CVResult:
    """Stratified k-fold accuracy of the boosted-tree classifier.

    ``feature_source``, when given, is called with the training indices of a
    fold and must return that fold's feature matrix for all items; it lets
    per-fold preprocessing (bin selection) see training data only.
    """
    labels = list(labels)
    classes = _class_order(labels)
    cls_index = {c: i for i, c in enumerate(classes)}
    folds = stratified_kfold(labels, k, seed)
    preds = np.full(len(labels), -1, dtype=np.intp)

    def run(task):
        f, train, test = task
        if feature_source is None:
            Xf, bins = np.asarray(X), None
        else:
            Xf, bins = feature_source(train)
        model = fit(Xf[train], [labels[i] for i in train], replace(cfg, seed=cfg.seed + f))
        out = predict(model, Xf[test])
        return f, test, [cls_index[o] for o in out], bins

    tasks = list(_fold_tasks(folds, len(labels)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    correct, totals, bins_used = [], [], []
    for f, test, out, bins in results:
        preds[test] = out
        truth = np.array([cls_index[labels[i]] for i in test])
        correct.append(int(np.sum(truth == np.array(out))))
        totals.append(int(test.size))
        if bins is not None:
            bins_used.append(bins)
    return CVResult(correct, totals, preds, bins_used)


def confusion_matrix(truth: Sequence[int], pred: Sequence[int], n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (np.asarray(truth, dtype=np.intp), np.asarray(pred, dtype=np.intp)), 1)
    return cm


# --- experiments ---------------------------------------------------------------------

PROTOCOLS = ("cv", "holdout", "cv+holdout")


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: dict
    task: str = "2class"
    protocol: str = "cv+holdout"
    folds: int = 10
    holdout_fraction: float = 0.2
    seed: int = 0
    extraction: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    bin_candidates: list | None = None
    bin_cv_folds: int = 3
    variable_filter: str = "all"
    ci_method: str = "normal"
    outputs: dict = field(default_factory=dict)
    base_dir: str | None = None

    def __post_init__(self):
        if self.task not in ("2class", "4class"):
            raise InvalidConfig(f"task must be 2class or 4class, got {self.task!r}")
        if self.protocol not in PROTOCOLS:
            raise InvalidConfig(f"protocol must be one of {PROTOCOLS}")
        if self.variable_filter not in ("all", "numerical"):
            raise InvalidConfig("variable_filter must be 'all' or 'numerical'")
        if "source" not in self.dataset:
            raise InvalidConfig("dataset.source is required")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown experiment keys: {sorted(unknown)}")
        d = dict(d)
        if base_dir is not None and d.get("base_dir") is None:
            d["base_dir"] = str(base_dir)
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def resolve(self, p) -> Path:
        p = Path(p)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def load_dataset(spec: ExperimentSpec) -> PairDataset:
    ds_cfg = dict(spec.dataset)
    source = DataSource(ds_cfg.pop("source"))
    if source is DataSource.SYNTHETIC:
        classes = int(ds_cfg.get("classes", 4 if spec.task == "4class" else 2))
        if "path" in ds_cfg:
            return load_challenge_dir(spec.resolve(ds_cfg["path"]), source=DataSource.SYNTHETIC)
        return generate_synthetic_anm(int(ds_cfg.get("pairs", 200)), int(ds_cfg.get("samples", 500)),
                                      int(ds_cfg.get("seed", spec.seed)), classes)
    if source is DataSource.CHALLENGE:
        threshold = int(ds_cfg.get("categorical_threshold", 20))
        if "path" in ds_cfg:
            return load_challenge_dir(spec.resolve(ds_cfg["path"]), categorical_threshold=threshold)
        types = ds_cfg.get("types")
        return load_challenge(spec.resolve(ds_cfg["data"]), spec.resolve(ds_cfg["targets"]),
                              spec.resolve(types) if types else None, categorical_threshold=threshold)
    ds = load_tuebingen(spec.resolve(ds_cfg["path"]))
    return randomize_directions(ds, int(ds_cfg.get("seed", spec.seed)))


def _prepare(ds: PairDataset, spec: ExperimentSpec) -> PairDataset:
    if spec.variable_filter == "numerical":
        keep = [i for i, p in enumerate(ds.pairs) if p.x_kind is VariableKind.NUMERICAL and p.y_kind is VariableKind.NUMERICAL]
        ds = ds.subset(keep)
    present = set(ds.labels)
    if spec.task == "4class":
        if len(present) < 3 or not present - {PairLabel.CAUSAL, PairLabel.ANTICAUSAL}:
            raise InvalidConfig(f"4class task needs confounded/independent labels; dataset has {sorted(l.value for l in present)}")
    else:
        ds = ds.subset([i for i, lab in enumerate(ds.labels) if lab in (PairLabel.CAUSAL, PairLabel.ANTICAUSAL)])
    if len(set(ds.labels)) < 2:
        raise InvalidConfig("dataset has fewer than two classes after filtering")
    return ds


class _FeatureCache:
    """Feature matrices per bin count; extraction never looks at labels."""

    def __init__(self, pairs, base: ExtractionConfig, threads: int):
        self.pairs, self.base, self.threads = pairs, base, threads
        self._cache: dict[int, np.ndarray] = {}

    def get(self, bins: int | None = None) -> np.ndarray:
        bins = self.base.n_bins if bins is None else int(bins)
        if bins not in self._cache:
            self._cache[bins] = feature_matrix(self.pairs, replace(self.base, n_bins=bins), self.threads)
        return self._cache[bins]


def _select_bins_on(matrix_for, labels, rows, spec: ExperimentSpec, tcfg: TrainConfig) -> int:
    """Tune the bin count by inner CV on ``rows`` of ``matrix_for(bins)`` only."""
    sub = [labels[i] for i in rows]
    return best_bins(spec.bin_candidates,
                     lambda b: cross_validate(matrix_for(b)[rows], sub, spec.bin_cv_folds, tcfg, spec.seed).mean_accuracy)


def _class_stats(truth, pred, classes, ci_method):
    cm = confusion_matrix(truth, pred, len(classes))
    correct = int(np.trace(cm))
    total = int(cm.sum())
    acc, half = accuracy_ci(correct, total, ci_method)
    per_class = {}
    for i, c in enumerate(classes):
        support = int(cm[i].sum())
        per_class[getattr(c, "value", c)] = (cm[i, i] / support) if support else None
    return {"accuracy": acc, "ci_half_width": half, "correct": correct, "total": total,
            "per_class_accuracy": per_class, "confusion_matrix": cm.tolist()}


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one experiment and return its report as a JSON-ready dict.

    Every field is always present; fields that do not apply to the chosen
    protocol are ``None``.
    """
    threads = n_threads()
    try:
        ds = _prepare(load_dataset(spec), spec)
    except QIFError as exc:
        raise type(exc)(f"experiment dataset: {exc}") from exc
    ecfg = ExtractionConfig.from_dict(spec.extraction)
    tcfg = TrainConfig(**{"seed": spec.seed, **spec.training})
    labels = list(ds.labels)
    classes = _class_order(labels)
    cls_index = {c: i for i, c in enumerate(classes)}
    cache = _FeatureCache(ds.pairs, ecfg, threads)
    tune = bool(spec.bin_candidates)

    if spec.protocol == "cv":
        train_idx, test_idx = np.arange(len(ds)), np.array([], dtype=np.intp)
    else:
        train_idx, test_idx = holdout_split(labels, spec.holdout_fraction, spec.seed)
    train_labels = [labels[i] for i in train_idx]

    report: dict = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "seed": spec.seed,
        "config": spec.echo(),
        "dataset": {"source": ds.source.value, "n_pairs": len(ds), "skipped": ds.skipped,
                    "class_counts": {getattr(c, "value", c): labels.count(c) for c in classes}},
        "classes": [getattr(c, "value", c) for c in classes],
        "feature_names": list(FEATURE_NAMES),
        "cv": None,
        "holdout": None,
        "selected_bins": None,
        "feature_importance": None,
    }

    if spec.protocol in ("cv", "cv+holdout"):
        if tune:
            def source(fold_train):
                b = _select_bins_on(lambda k: cache.get(k)[train_idx], train_labels, fold_train, spec, tcfg)
                return cache.get(b)[train_idx], b
        else:
            source = None
        cv = cross_validate(cache.get()[train_idx], train_labels, spec.folds, tcfg, spec.seed, threads, source)
        fold_acc = cv.fold_accuracies
        truth = [cls_index[lab] for lab in train_labels]
        stats = _class_stats(truth, cv.predictions, classes, spec.ci_method)
        fold_se = float(np.std(fold_acc, ddof=1) / math.sqrt(len(fold_acc))) if len(fold_acc) > 1 else None
        report["cv"] = {
            "k": spec.folds,
            "mean_accuracy": cv.mean_accuracy,
            "ci_half_width": stats["ci_half_width"],
            "fold_accuracies": fold_acc,
            "fold_correct": cv.fold_correct,
            "fold_totals": cv.fold_total,
            "fold_standard_error": fold_se,
            "per_class_accuracy": stats["per_class_accuracy"],
            "confusion_matrix": stats["confusion_matrix"],
            "fold_selected_bins": cv.selected_bins or None,
        }

    bins = _select_bins_on(cache.get, labels, train_idx, spec, tcfg) if tune else ecfg.n_bins
    if tune:
        report["selected_bins"] = bins
    X = cache.get(bins)
    model = fit(X[train_idx], train_labels, tcfg, FEATURE_NAMES)
    report["feature_importance"] = [{"feature": n, "importance": v} for n, v in ranked_importance(model)]

    if spec.protocol in ("holdout", "cv+holdout"):
        pred = [cls_index[p] for p in predict(model, X[test_idx])]
        truth = [cls_index[labels[i]] for i in test_idx]
        report["holdout"] = {"fraction": spec.holdout_fraction, "n_train": int(train_idx.size),
                             **_class_stats(truth, pred, classes, spec.ci_method)}

    outputs = spec.outputs or {}
    if outputs.get("features_csv"):
        write_features_csv(spec.resolve(outputs["features_csv"]), ds.ids, X, labels)
    if outputs.get("folds_csv") and report["cv"] is not None:
        with open(spec.resolve(outputs["folds_csv"]), "w", encoding="utf-8") as fh:
            fh.write("fold,correct,total,accuracy\n")
            for i, (c, t) in enumerate(zip(report["cv"]["fold_correct"], report["cv"]["fold_totals"])):
                fh.write(f"{i},{c},{t},{c / t!r}\n")
    if outputs.get("text"):
        Path(spec.resolve(outputs["text"])).write_text(format_report(report), encoding="utf-8")
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def format_report(report: dict) -> str:
    """Human-readable summary of a report dict."""
    lines = [f"dataset: {report['dataset']['source']} ({report['dataset']['n_pairs']} pairs, "
             f"{report['dataset']['skipped']} skipped)",
             f"classes: {', '.join(report['classes'])}"]
    if report["selected_bins"] is not None:
        lines.append(f"selected bins: {report['selected_bins']}")
    cv = report["cv"]
    if cv is not None:
        lines.append(f"{cv['k']}-fold CV accuracy: {cv['mean_accuracy']:.4f} ± {cv['ci_half_width']:.4f} "
                     f"(fold s.e. {cv['fold_standard_error'] or 0:.4f})")
        lines.append("  folds: " + " ".join(f"{a:.3f}" for a in cv["fold_accuracies"]))
    ho = report["holdout"]
    if ho is not None:
        lines.append(f"holdout accuracy: {ho['accuracy']:.4f} ± {ho['ci_half_width']:.4f} "
                     f"({ho['correct']}/{ho['total']})")
    lines.append("top features:")
    for row in report["feature_importance"][:10]:
        lines.append(f"  {row['feature']:<38s} {row['importance']:.4f}")
    return "\n".join(lines) + "\n"
