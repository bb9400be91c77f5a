"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import random_joint, random_prior_channel, record_acceptance
from qifcausal.channel import Channel, Distribution, FlowDirection, JointDistribution, joint_to_prior_channel
from qifcausal.cli import main
from qifcausal.features import DIFF_FEATURES, FEATURE_NAMES, VariableKind, VariablePair, extract_features
from qifcausal.gbdt import TrainConfig, fit, loss_gradients, loss_value, predict
from qifcausal.measures import LeakageMode, MeasureKind, bayes_capacity, leakage, posterior_measure, prior_measure

BV, SH = MeasureKind.BAYES_VULNERABILITY, MeasureKind.SHANNON
ADD, MUL = LeakageMode.ADDITIVE, LeakageMode.MULTIPLICATIVE


def test_1_shannon_equivalence():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_mi = worst_sym = 0.0
    for _ in range(1000):
        cells = random_joint(rng, max_support=16, sparsity=0.2)
        j = JointDistribution(cells)
        direct = leakage(SH, ADD, *joint_to_prior_channel(j, FlowDirection.DIRECT))
        reverse = leakage(SH, ADD, *joint_to_prior_channel(j, FlowDirection.REVERSE))
        mi = oracles.mutual_information(cells.tolist())
        worst_mi = max(worst_mi, abs(direct - mi))
        worst_sym = max(worst_sym, abs(direct - reverse))
    elapsed = time.perf_counter() - start
    ok = worst_mi <= 1e-9 and worst_sym <= 1e-9 and elapsed < 10
    record_acceptance(1, "Shannon equivalence", ok, f"max|L-MI|={worst_mi:.1e} max|D-R|={worst_sym:.1e} in {elapsed:.2f}s")
    assert ok


def test_2_monotonicity():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        p, rows = random_prior_channel(rng)
        prior, ch = Distribution(p), Channel(rows)
        worst = max(worst,
                    prior_measure(BV, prior) - posterior_measure(BV, prior, ch),
                    posterior_measure(SH, prior, ch) - prior_measure(SH, prior))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    record_acceptance(2, "monotonicity", ok, f"worst violation {worst:.1e} in {elapsed:.2f}s")
    assert ok


def test_3_capacity_bound():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst_bound = worst_eq = 0.0
    for _ in range(1000):
        p, rows = random_prior_channel(rng)
        ch = Channel(rows)
        bound = 2 ** bayes_capacity(ch)
        worst_bound = max(worst_bound, leakage(BV, MUL, Distribution(p), ch) - bound)
        worst_eq = max(worst_eq, abs(leakage(BV, MUL, Distribution.uniform(p.size), ch) - bound))
    elapsed = time.perf_counter() - start
    ok = worst_bound <= 1e-9 and worst_eq <= 1e-9 and elapsed < 10
    record_acceptance(3, "capacity bound", ok, f"max excess {worst_bound:.1e}, max |uniform-bound| {worst_eq:.1e} in {elapsed:.2f}s")
    assert ok


def test_4_hand_enumerated_channel():
    rows = [[0.8, 0.2], [0.3, 0.7]]
    prior, ch = Distribution([0.5, 0.5]), Channel(rows)
    post_oracle = oracles.posterior_bayes_vulnerability([0.5, 0.5], rows)
    cap_oracle = oracles.column_maxima_capacity(rows)
    checks = {
        "posterior": (posterior_measure(BV, prior, ch), post_oracle, 0.75),
        "additive": (leakage(BV, ADD, prior, ch), post_oracle - 0.5, 0.25),
        "multiplicative": (leakage(BV, MUL, prior, ch), post_oracle / 0.5, 1.5),
        "capacity": (bayes_capacity(ch), cap_oracle, math.log2(1.5)),
    }
    ok = all(abs(v - o) <= 1e-12 and abs(v - e) <= 1e-12 for v, o, e in checks.values())
    record_acceptance(4, "hand-enumerated channel", ok, ", ".join(f"{k}={v[0]:.12g}" for k, v in checks.items()))
    assert ok


def test_5_independence_null():
    rng = np.random.default_rng(5)
    worst_null = worst_swap = 0.0
    for nx, ny, reps in [(2, 2, 1), (3, 4, 2), (5, 3, 3), (6, 6, 1)]:
        xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        pair = VariablePair(np.tile(xs.ravel(), reps), np.tile(ys.ravel(), reps),
                            VariableKind.CATEGORICAL, VariableKind.CATEGORICAL, f"prod{nx}x{ny}")
        fv = extract_features(pair)
        for name in FEATURE_NAMES:
            if "_additive_" in name:
                worst_null = max(worst_null, abs(fv[name]))
            elif "_multiplicative_" in name and not name.endswith("_diff"):
                worst_null = max(worst_null, abs(fv[name] - 1.0))
    for i in range(20):
        x = rng.normal(size=300)
        pair = VariablePair(x, np.sin(3 * x) + 0.2 * rng.normal(size=300), id=str(i))
        a, b = extract_features(pair), extract_features(pair.swap())
        worst_swap = max(worst_swap, max(abs(a[n] + b[n]) for n in DIFF_FEATURES))
    ok = worst_null <= 1e-9 and worst_swap <= 1e-9
    record_acceptance(5, "independence null", ok, f"max null deviation {worst_null:.1e}, max diff-negation error {worst_swap:.1e}")
    assert ok


def test_6_classifier_correctness():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    worst = 0.0
    eps = 1e-6
    for i in range(100):
        K = 1 if i % 2 == 0 else 4
        n = 6
        y = rng.integers(0, 2 if K == 1 else K, n)
        s = rng.normal(0, 2, size=(n,) if K == 1 else (n, K))
        g, h = loss_gradients(y, s)
        flat = s.ravel()
        for k in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[k] += eps
            dn[k] -= eps
            fd_g = (loss_value(y, up.reshape(s.shape)) - loss_value(y, dn.reshape(s.shape))) / (2 * eps)
            fd_h = (loss_gradients(y, up.reshape(s.shape))[0].ravel()[k] - loss_gradients(y, dn.reshape(s.shape))[0].ravel()[k]) / (2 * eps)
            worst = max(worst, abs(fd_g - g.ravel()[k]), abs(fd_h - h.ravel()[k]))
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    X = np.repeat(pts, 50, axis=0)
    yx = np.repeat([0, 1, 1, 0], 50)
    xor_acc = float(np.mean(np.array(predict(fit(X, yx, TrainConfig(n_trees=50, max_depth=2)), X)) == yx))
    Xr = rng.normal(size=(300, 21))
    yr = (Xr[:, 0] + Xr[:, 5] * Xr[:, 7] > 0).astype(int)
    same = fit(Xr, yr, TrainConfig(seed=11, subsample=0.8)).to_json() == fit(Xr, yr, TrainConfig(seed=11, subsample=0.8)).to_json()
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and xor_acc == 1.0 and same and elapsed < 30
    record_acceptance(6, "classifier correctness", ok,
                      f"max FD error {worst:.1e}, XOR accuracy {xor_acc}, identical models {same}, {elapsed:.1f}s")
    assert ok


def _run_evaluate(tmp_path, name, spec) -> dict:
    spec_path = tmp_path / f"{name}.json"
    spec_path.write_text(json.dumps(spec))
    report_path = tmp_path / f"{name}.report.json"
    assert main(["evaluate", "--spec", str(spec_path), "--report-out", str(report_path)]) == 0
    return json.loads(report_path.read_text())


@pytest.mark.slow
@pytest.mark.parametrize("classes, floor", [(2, 0.60), (4, 0.40)])
def test_7_synthetic_benchmark(tmp_path, classes, floor):
    start = time.perf_counter()
    data = tmp_path / f"synth{classes}"
    assert main(["synth", "--pairs", "2000", "--samples", "1000", "--classes", str(classes), "--seed", "0", "--out", str(data)]) == 0
    report = _run_evaluate(tmp_path, f"bench{classes}", {
        "dataset": {"source": "synthetic", "path": str(data)},
        "task": f"{classes}class",
        "protocol": "cv",
        "folds": 10,
        "seed": 0,
    })
    elapsed = time.perf_counter() - start
    acc = report["cv"]["mean_accuracy"]
    top3 = [row["feature"] for row in report["feature_importance"][:3]]
    ok = acc >= floor and elapsed < 600 and len(report["cv"]["fold_accuracies"]) == 10
    record_acceptance(7, f"synthetic benchmark ({classes}-class)", ok,
                      f"10-fold CV accuracy {acc:.4f} ± {report['cv']['ci_half_width']:.4f} (floor {floor}), "
                      f"{elapsed:.0f}s, top features {top3}")
    assert ok
    if classes == 2:
        # a direct-minus-reverse difference of a leakage family ranks among the top three
        families = ("bayes_vulnerability_", "bayes_risk_", "shannon_")
        assert any(f.endswith("_diff") and f.startswith(families) for f in top3)


TUEBINGEN_DIR = os.environ.get("QIF_TUEBINGEN_DIR", str(Path(__file__).parent / "data" / "tuebingen"))


@pytest.mark.skipif(not (Path(TUEBINGEN_DIR) / "pairmeta.txt").is_file(),
                    reason="Tuebingen pairs not available (set QIF_TUEBINGEN_DIR)")
def test_8_tuebingen(tmp_path):
    report = _run_evaluate(tmp_path, "tuebingen", {
        "dataset": {"source": "tuebingen", "path": TUEBINGEN_DIR},
        "task": "2class",
        "protocol": "cv",
        "folds": 10,
        "seed": 0,
    })
    acc = report["cv"]["mean_accuracy"]
    ok = acc > 0.55
    record_acceptance(8, "Tuebingen reproduction", ok,
                      f"{report['dataset']['n_pairs']} pairs ({report['dataset']['skipped']} skipped), CV accuracy {acc:.4f}")
    assert ok


def test_9_determinism(tmp_path, monkeypatch):
    spec = {
        "dataset": {"source": "synthetic", "pairs": 300, "samples": 400, "classes": 4},
        "task": "4class",
        "protocol": "cv+holdout",
        "folds": 5,
        "seed": 7,
        "training": {"n_trees": 40, "subsample": 0.8},
    }
    outputs = []
    for i, threads in enumerate(["1", "1", str(max(8, os.cpu_count() or 1))]):
        monkeypatch.setenv("QIF_CAUSAL_THREADS", threads)
        _run_evaluate(tmp_path, f"det{i}", spec)
        outputs.append((tmp_path / f"det{i}.report.json").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    record_acceptance(9, "determinism", ok, "repeat and multi-threaded reports byte-identical" if ok else "reports differ")
    assert ok
