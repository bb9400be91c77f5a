"""QIF feature vectors for variable pairs.

Every pair is mapped to 21 numbers. For each measure family (Bayes
vulnerability, Bayes risk, Shannon) and each leakage mode (additive,
multiplicative) there are three features: the direct leakage (X to Y), the
reverse leakage (Y to X) and their difference. The last three features are
the direct and reverse Bayes capacities and their difference.

``shannon_additive_diff`` is always zero up to rounding because additive
Shannon leakage is the mutual information, which is symmetric. It is kept so
the layout stays regular.
"""

from __future__ import annotations

import csv
import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .channel import (
    BandwidthLike,
    BandwidthRule,
    FlowDirection,
    JointDistribution,
    discretize_numeric,
    estimate_joint_categorical,
    estimate_joint_kde,
    joint_to_prior_channel,
)
from .errors import ConstantColumn, DegenerateLeakage, InvalidConfig, InvalidLabels, InvalidSamples
from .measures import (
    DEFAULT_CAP,
    LeakageMode,
    MeasureKind,
    bayes_capacity,
    leakage,
    posterior_measure,
    prior_measure,
)

logger = logging.getLogger(__name__)


class VariableKind(enum.Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"


def _leakage_names() -> list[str]:
    names = []
    for kind in MeasureKind:
        for mode in LeakageMode:
            for part in ("direct", "reverse", "diff"):
                names.append(f"{kind.value}_{mode.value}_{part}")
    return names


FEATURE_NAMES: tuple[str, ...] = tuple(_leakage_names() + ["capacity_direct", "capacity_reverse", "capacity_diff"])
N_FEATURES = len(FEATURE_NAMES)
DIFF_FEATURES: tuple[str, ...] = tuple(n for n in FEATURE_NAMES if n.endswith("_diff"))


@dataclass(frozen=True)
class VariablePair:
    x: np.ndarray
    y: np.ndarray
    x_kind: VariableKind = VariableKind.NUMERICAL
    y_kind: VariableKind = VariableKind.NUMERICAL
    id: str = ""

    def __post_init__(self):
        x = np.asarray(self.x)
        y = np.asarray(self.y)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
            raise InvalidSamples(f"pair {self.id!r}: columns must be 1-d and of equal length")
        if x.size < 2:
            raise InvalidSamples(f"pair {self.id!r}: at least two samples are needed")
        object.__setattr__(self, "x_kind", VariableKind(self.x_kind))
        object.__setattr__(self, "y_kind", VariableKind(self.y_kind))
        for name, col, kind in (("x", x, self.x_kind), ("y", y, self.y_kind)):
            if kind is VariableKind.NUMERICAL:
                col = col.astype(float)
                if not np.all(np.isfinite(col)):
                    raise InvalidSamples(f"pair {self.id!r}: numerical column {name} has NaN or inf")
            col.setflags(write=False)
            object.__setattr__(self, name, col)

    def __len__(self) -> int:
        return self.x.size

    def swap(self) -> "VariablePair":
        return VariablePair(self.y, self.x, self.y_kind, self.x_kind, self.id)


@dataclass(frozen=True)
class ExtractionConfig:
    n_bins: int = 10
    kde_grid: int = 32
    bandwidth: BandwidthLike = BandwidthRule.SILVERMAN
    degenerate_cap: float = DEFAULT_CAP
    # "kde" or "binning" for numerical/numerical pairs
    numeric_estimator: str = "kde"

    def __post_init__(self):
        if self.n_bins < 2:
            raise InvalidConfig("n_bins must be at least 2")
        if self.kde_grid < 4:
            raise InvalidConfig("kde_grid must be at least 4")
        if self.numeric_estimator not in ("kde", "binning"):
            raise InvalidConfig(f"unknown numeric estimator {self.numeric_estimator!r}")
        if not isinstance(self.bandwidth, (int, float)):
            object.__setattr__(self, "bandwidth", BandwidthRule(self.bandwidth))

    def to_dict(self) -> dict:
        bw = self.bandwidth.value if isinstance(self.bandwidth, BandwidthRule) else float(self.bandwidth)
        return {
            "n_bins": self.n_bins,
            "kde_grid": self.kde_grid,
            "bandwidth": bw,
            "degenerate_cap": self.degenerate_cap,
            "numeric_estimator": self.numeric_estimator,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractionConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...] = field(default=FEATURE_NAMES)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _binned(col: np.ndarray, kind: VariableKind, n_bins: int) -> np.ndarray:
    if kind is VariableKind.CATEGORICAL:
        return col
    return discretize_numeric(col, n_bins)


def pair_joint(pair: VariablePair, cfg: ExtractionConfig) -> JointDistribution:
    """Estimate the joint used for a pair's features."""
    both_numeric = pair.x_kind is VariableKind.NUMERICAL and pair.y_kind is VariableKind.NUMERICAL
    if both_numeric and cfg.numeric_estimator == "kde":
        try:
            return estimate_joint_kde(pair.x, pair.y, cfg.kde_grid, cfg.bandwidth)
        except ConstantColumn:
            logger.debug("pair %s has a constant column, falling back to binning", pair.id)
    xs = _binned(pair.x, pair.x_kind, cfg.n_bins)
    ys = _binned(pair.y, pair.y_kind, cfg.n_bins)
    return estimate_joint_categorical(xs.tolist(), ys.tolist())


def _safe_leakage(kind, mode, prior, ch, cap: float) -> float:
    try:
        return leakage(kind, mode, prior, ch)
    except DegenerateLeakage:
        # 0/0 means nothing could be learned; x/0 means the secret was fully revealed
        num = posterior_measure(kind, prior, ch) if kind.is_gain else prior_measure(kind, prior)
        return 1.0 if num == 0 else cap


def features_from_joint(joint: JointDistribution, cap: float = DEFAULT_CAP) -> FeatureVector:
    flows = {d: joint_to_prior_channel(joint, d) for d in FlowDirection}
    values = []
    for kind in MeasureKind:
        for mode in LeakageMode:
            direct = _safe_leakage(kind, mode, *flows[FlowDirection.DIRECT], cap)
            reverse = _safe_leakage(kind, mode, *flows[FlowDirection.REVERSE], cap)
            values += [direct, reverse, direct - reverse]
    cap_d = bayes_capacity(flows[FlowDirection.DIRECT][1])
    cap_r = bayes_capacity(flows[FlowDirection.REVERSE][1])
    values += [cap_d, cap_r, cap_d - cap_r]
    arr = np.clip(np.array(values, dtype=float), -cap, cap)
    arr.setflags(write=False)
    return FeatureVector(arr)


def extract_features(pair: VariablePair, cfg: ExtractionConfig | None = None) -> FeatureVector:
    """Compute the 21 QIF features of one pair.

    Numerical/numerical pairs go through the kernel density grid unless the
    config asks for binning; any categorical side switches to binning the
    numerical side(s) and counting.
    """
    cfg = cfg or ExtractionConfig()
    return features_from_joint(pair_joint(pair, cfg), cfg.degenerate_cap)


def n_threads() -> int:
    """Worker count from ``QIF_CAUSAL_THREADS`` (default 1)."""
    raw = os.environ.get("QIF_CAUSAL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidConfig(f"QIF_CAUSAL_THREADS must be an integer, got {raw!r}") from None


def feature_matrix(pairs: Sequence[VariablePair], cfg: ExtractionConfig | None = None, threads: int | None = None) -> np.ndarray:
    """Stack feature vectors of many pairs into an ``(n_pairs, 21)`` array."""
    cfg = cfg or ExtractionConfig()
    threads = threads or n_threads()
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vectors = list(pool.map(lambda p: extract_features(p, cfg).values, pairs))
    else:
        vectors = [extract_features(p, cfg).values for p in pairs]
    if not vectors:
        return np.zeros((0, N_FEATURES))
    return np.vstack(vectors)


def write_features_csv(path, ids: Sequence[str], matrix: np.ndarray, labels: Sequence | None = None) -> None:
    """Write one row per pair id under a fixed header of feature names.

    When labels are given a ``label`` column follows ``pair_id``.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (len(ids), N_FEATURES):
        raise InvalidConfig(f"expected a ({len(ids)}, {N_FEATURES}) matrix, got {matrix.shape}")
    header = ["pair_id"] + (["label"] if labels is not None else []) + list(FEATURE_NAMES)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, pid in enumerate(ids):
            row = [pid]
            if labels is not None:
                lab = labels[i]
                row.append(getattr(lab, "value", lab))
            writer.writerow(row + [repr(float(v)) for v in matrix[i]])


def read_features_csv(path) -> tuple[list[str], np.ndarray, list[str] | None]:
    """Inverse of :func:`write_features_csv`: ``(ids, matrix, labels or None)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "pair_id":
            raise InvalidConfig(f"{path}: not a feature CSV")
        has_labels = len(header) > 1 and header[1] == "label"
        names = header[2:] if has_labels else header[1:]
        if tuple(names) != FEATURE_NAMES:
            raise InvalidConfig(f"{path}: unexpected feature columns")
        ids, labels, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ids.append(row[0])
                if has_labels:
                    labels.append(row[1])
                rows.append([float(v) for v in row[2 if has_labels else 1:]])
            except (ValueError, IndexError) as exc:
                raise InvalidConfig(f"{path}:{line_no}: {exc}") from None
    matrix = np.array(rows, dtype=float).reshape(len(rows), N_FEATURES)
    return ids, matrix, (labels if has_labels else None)


def best_bins(candidates: Iterable[int], score) -> int:
    """Candidate with the highest ``score(bins)``; ties go to the smaller count."""
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise InvalidConfig("no bin candidates")
    if len(candidates) == 1:
        return candidates[0]
    best, best_score = candidates[0], -np.inf
    for bins in candidates:
        s = score(bins)
        logger.info("bins=%d score=%.4f", bins, s)
        if s > best_score:
            best, best_score = bins, s
    return best


def select_bins(
    pairs: Sequence[VariablePair],
    labels: Sequence,
    candidates: Iterable[int],
    cv_folds: int = 3,
    seed: int = 0,
    base_config: ExtractionConfig | None = None,
    train_config=None,
) -> int:
    """Bin count with the best mean cross-validated accuracy.

    Only the given pairs are touched, so callers pass training data only.
    """
    from .evaluation import cross_validate
    from .gbdt import TrainConfig

    if len(set(labels)) < 2:
        raise InvalidLabels("bin selection needs at least two classes")
    base_config = base_config or ExtractionConfig()
    train_config = train_config or TrainConfig(seed=seed)

    def score(bins):
        X = feature_matrix(pairs, replace(base_config, n_bins=bins))
        return cross_validate(X, labels, cv_folds, train_config, seed).mean_accuracy

    return best_bins(candidates, score)
