"""Gradient-boosted decision trees for binary and multiclass labels.

Binary problems use the logistic loss with a single tree per stage;
problems with K > 2 classes use softmax cross-entropy with one tree per class
per stage. Trees are grown greedily with exact split search over sorted
feature values and Newton leaf weights ``-G / (H + lambda)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, InvalidFeatures, InvalidLabels

MODEL_FORMAT = "qifcausal.gbdt"
MODEL_VERSION = 1
_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample: float = 1.0
    reg_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise InvalidConfig("n_trees must be nonnegative")
        if not 0 < self.learning_rate <= 1:
            raise InvalidConfig("learning_rate must lie in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise InvalidConfig("subsample must lie in (0, 1]")
        if self.max_depth < 0 or self.min_samples_leaf < 1 or self.reg_lambda < 0:
            raise InvalidConfig("invalid tree-shape parameters")


@dataclass
class Tree:
    """Flat binary tree. Node 0 is the root; ``left[i] == -1`` marks a leaf.

    A row goes left when ``row[feature[i]] < threshold[i]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.left[node] >= 0
        while np.any(active):
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] < self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.left[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.intp),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.intp),
            np.array(d["right"], dtype=np.intp),
            np.array(d["value"], dtype=float),
            np.array(d["gain"], dtype=float),
        )


class _TreeBuilder:
    def __init__(self, X, g, h, cfg: TrainConfig):
        self.X, self.g, self.h, self.cfg = X, g, h, cfg
        self.nodes: list[list] = []  # [feature, threshold, left, right, value, gain]

    def _leaf_value(self, G: float, H: float) -> float:
        return -G / (H + self.cfg.reg_lambda)

    def _best_split(self, idx: np.ndarray):
        msl = self.cfg.min_samples_leaf
        m = idx.size
        if m < 2 * msl:
            return None
        lam = self.cfg.reg_lambda
        Xn = self.X[idx]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        gs = self.g[idx][order]
        hs = self.h[idx][order]
        GL = np.cumsum(gs, axis=0)[:-1]
        HL = np.cumsum(hs, axis=0)[:-1]
        G, H = gs.sum(axis=0), hs.sum(axis=0)
        GR, HR = G - GL, H - HL
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam))
        n_left = np.arange(1, m)[:, None]
        valid = (xs[1:] > xs[:-1]) & (n_left >= msl) & (m - n_left >= msl)
        gain = np.where(valid & np.isfinite(gain), gain, -np.inf)
        # feature-major flattening: ties go to the lower feature index, then the lower threshold
        flat = int(np.argmax(gain.T))
        feat, pos = divmod(flat, m - 1)
        best = gain[pos, feat]
        if not np.isfinite(best) or best < -_GAIN_EPS:
            return None
        thr = 0.5 * (xs[pos, feat] + xs[pos + 1, feat])
        if not thr > xs[pos, feat]:  # midpoint rounded onto the lower value
            thr = xs[pos + 1, feat]
        left = idx[order[: pos + 1, feat]]
        right = idx[order[pos + 1 :, feat]]
        return feat, float(thr), max(float(best), 0.0), np.sort(left), np.sort(right)

    def _grow(self, idx: np.ndarray, depth: int) -> int:
        node_id = len(self.nodes)
        G, H = float(self.g[idx].sum()), float(self.h[idx].sum())
        self.nodes.append([-1, 0.0, -1, -1, self._leaf_value(G, H), 0.0])
        split = self._best_split(idx) if depth < self.cfg.max_depth else None
        if split is None:
            return node_id
        feat, thr, gain, left, right = split
        left_id = self._grow(left, depth + 1)
        right_id = self._grow(right, depth + 1)
        self.nodes[node_id] = [feat, thr, left_id, right_id, 0.0, gain]
        return node_id

    def build(self, idx: np.ndarray) -> Tree:
        self._grow(idx, 0)
        cols = list(zip(*self.nodes))
        return Tree(
            np.array(cols[0], dtype=np.intp),
            np.array(cols[1], dtype=float),
            np.array(cols[2], dtype=np.intp),
            np.array(cols[3], dtype=np.intp),
            np.array(cols[4], dtype=float),
            np.array(cols[5], dtype=float),
        )


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def loss_value(labels, raw_scores) -> float:
    """Total logistic (1-d scores) or softmax cross-entropy (2-d scores) loss."""
    y = np.asarray(labels, dtype=np.intp)
    s = np.asarray(raw_scores, dtype=float)
    if s.ndim == 1:
        return float(np.sum(np.logaddexp(0.0, s) - y * s))
    shifted = s - s.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return float(np.sum(logz - shifted[np.arange(y.size), y]))


def loss_gradients(labels, raw_scores) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the loss with respect to raw scores.

    ``labels`` are integer class indices. One-dimensional scores mean the
    binary logistic loss (label 1 is the positive class); an ``(n, K)`` score
    matrix means softmax cross-entropy, with the diagonal of the Hessian.
    """
    y = np.asarray(labels, dtype=np.intp)
    s = np.asarray(raw_scores, dtype=float)
    if s.shape[0] != y.size or s.ndim not in (1, 2):
        raise DimensionMismatch(f"scores of shape {s.shape} do not match {y.size} labels")
    if s.ndim == 1:
        p = _sigmoid(s)
        return p - y, p * (1.0 - p)
    p = _softmax(s)
    onehot = np.zeros_like(p)
    onehot[np.arange(y.size), y] = 1.0
    return p - onehot, p * (1.0 - p)


def _label_key(label):
    return (0, list(type(label)).index(label)) if isinstance(label, enum.Enum) else (1, label)


@dataclass
class BoostedModel:
    classes: list
    base_score: np.ndarray
    trees: list[list[Tree]]  # trees[stage][k]
    config: TrainConfig
    feature_names: list[str] = field(default_factory=list)
    n_features: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def n_outputs(self) -> int:
        return 1 if len(self.classes) == 2 else len(self.classes)

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        scores = np.tile(self.base_score, (X.shape[0], 1))
        lr = self.config.learning_rate
        for stage in self.trees:
            for k, tree in enumerate(stage):
                scores[:, k] += lr * tree.predict(X)
        return scores

    def to_json(self) -> str:
        label_type = "enum" if isinstance(self.classes[0], enum.Enum) else type(self.classes[0]).__name__
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "label_type": label_type,
            "label_enum": f"{type(self.classes[0]).__module__}.{type(self.classes[0]).__qualname__}" if label_type == "enum" else None,
            "classes": [getattr(c, "value", c) for c in self.classes],
            "feature_names": list(self.feature_names),
            "n_features": self.n_features,
            "base_score": self.base_score.tolist(),
            "config": asdict(self.config),
            "trees": [[t.to_dict() for t in stage] for stage in self.trees],
            "extra": self.extra,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BoostedModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT:
            raise InvalidConfig("not a boosted-tree model document")
        if doc.get("version") != MODEL_VERSION:
            raise InvalidConfig(f"unsupported model version {doc.get('version')}")
        classes = doc["classes"]
        if doc["label_type"] == "enum":
            from .datasets import PairLabel

            enum_cls = {f"{PairLabel.__module__}.{PairLabel.__qualname__}": PairLabel}.get(doc["label_enum"])
            if enum_cls is None:
                raise InvalidConfig(f"unknown label enum {doc['label_enum']}")
            classes = [enum_cls(c) for c in classes]
        return cls(
            classes=classes,
            base_score=np.array(doc["base_score"], dtype=float),
            trees=[[Tree.from_dict(t) for t in stage] for stage in doc["trees"]],
            config=TrainConfig(**doc["config"]),
            feature_names=list(doc["feature_names"]),
            n_features=int(doc["n_features"]),
            extra=doc.get("extra", {}),
        )


def fit(features, labels: Sequence, cfg: TrainConfig | None = None, feature_names: Sequence[str] | None = None,
        loss_trace: list | None = None) -> BoostedModel:
    """Train a boosted-tree classifier.

    Parameters
    ----------
    features : array-like, shape (n_samples, n_features)
    labels : sequence of hashable class labels (at least two distinct)
    cfg : TrainConfig
    feature_names : optional column names kept in the model
    loss_trace : if a list is given, the training loss after every stage is
        appended to it (the initial loss first)

    Returns
    -------
    BoostedModel
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise DimensionMismatch(f"feature matrix {X.shape} does not match {len(labels)} labels")
    if not np.all(np.isfinite(X)):
        raise InvalidFeatures("features contain NaN or infinite values")
    labels = [lab.item() if isinstance(lab, np.generic) else lab for lab in labels]
    classes = sorted(set(labels), key=_label_key)
    if len(classes) < 2:
        raise InvalidLabels("training needs at least two classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in labels], dtype=np.intp)
    n = y.size
    counts = np.bincount(y, minlength=len(classes)).astype(float)
    if len(classes) == 2:
        base = np.array([np.log(counts[1] / counts[0])])
    else:
        base = np.log(counts / n)
    K = base.size
    scores = np.tile(base, (n, 1))
    rng = np.random.default_rng(cfg.seed)
    trees: list[list[Tree]] = []
    all_rows = np.arange(n)

    def current_loss():
        return loss_value(y, scores[:, 0] if K == 1 else scores)

    if loss_trace is not None:
        loss_trace.append(current_loss())
    for _ in range(cfg.n_trees):
        g, h = loss_gradients(y, scores[:, 0] if K == 1 else scores)
        g, h = g.reshape(n, K), h.reshape(n, K)
        if cfg.subsample < 1.0:
            size = max(1, int(round(cfg.subsample * n)))
            rows = np.sort(rng.choice(n, size=size, replace=False))
        else:
            rows = all_rows
        stage = []
        for k in range(K):
            tree = _TreeBuilder(X, g[:, k], h[:, k], cfg).build(rows)
            stage.append(tree)
        for k, tree in enumerate(stage):
            scores[:, k] += cfg.learning_rate * tree.predict(X)
        trees.append(stage)
        if loss_trace is not None:
            loss_trace.append(current_loss())
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    return BoostedModel(classes, base, trees, cfg, names, X.shape[1])


def predict_proba(model: BoostedModel, rows) -> np.ndarray:
    """Class probabilities, in ``model.classes`` order.

    A single row gives a 1-d vector, a matrix gives one row per sample.
    """
    single = np.ndim(rows) == 1
    scores = model.raw_scores(rows)
    if model.n_outputs == 1:
        p = _sigmoid(scores[:, 0])
        proba = np.column_stack([1.0 - p, p])
    else:
        proba = _softmax(scores)
    return proba[0] if single else proba


def proba_to_label(model: BoostedModel, proba: np.ndarray):
    """Argmax class; exact ties resolve to the earlier class."""
    proba = np.asarray(proba)
    if proba.ndim == 1:
        return model.classes[int(np.argmax(proba))]
    return [model.classes[i] for i in np.argmax(proba, axis=1)]


def predict(model: BoostedModel, rows):
    return proba_to_label(model, predict_proba(model, rows))


def feature_importance(model: BoostedModel) -> dict[str, float]:
    """Total split gain per feature, normalized to sum to one.

    A model without any positive-gain split returns all zeros.
    """
    totals = np.zeros(model.n_features)
    for stage in model.trees:
        for tree in stage:
            internal = tree.left >= 0
            np.add.at(totals, tree.feature[internal], tree.gain[internal])
    s = totals.sum()
    if s > 0:
        totals = totals / s
    return dict(zip(model.feature_names, totals.tolist()))


def ranked_importance(model: BoostedModel) -> list[tuple[str, float]]:
    imp = feature_importance(model)
    return sorted(imp.items(), key=lambda kv: (-kv[1], model.feature_names.index(kv[0])))
