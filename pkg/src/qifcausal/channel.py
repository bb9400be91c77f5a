"""Discrete joints, priors and channels built from raw sample columns.

A pair of sample columns is first turned into a :class:`JointDistribution`,
either by counting categories or by evaluating a bivariate Gaussian kernel
density on a regular lattice. The joint is then factorized into a prior and a
row-stochastic :class:`Channel`, in the direct (X to Y) or reverse (Y to X)
orientation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence, Union

import numpy as np

from .errors import ConstantColumn, InvalidChannel, InvalidDistribution, InvalidJoint, InvalidSamples

SUM_TOL = 1e-9


class FlowDirection(enum.Enum):
    DIRECT = "direct"
    REVERSE = "reverse"


class BandwidthRule(enum.Enum):
    """Per-axis kernel bandwidth rules, ``h = c * sigma * n ** (-1/5)``."""

    SILVERMAN = "silverman"
    SCOTT = "scott"

    def bandwidth(self, values: np.ndarray) -> float:
        n = values.size
        sigma = float(np.std(values, ddof=1))
        coef = 1.06 if self is BandwidthRule.SILVERMAN else 1.0
        return coef * sigma * n ** (-0.2)


def _as_vector(probs) -> np.ndarray:
    arr = np.array(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidDistribution("a distribution needs a nonempty 1-d probability vector")
    return arr


@dataclass(frozen=True)
class Distribution:
    """A finite probability vector."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_vector(self.probs)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidDistribution("probabilities must be finite and nonnegative")
        if abs(arr.sum() - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"probabilities sum to {arr.sum()!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def support_size(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class JointDistribution:
    """Joint probabilities ``cells[i, j] = P(X = x_labels[i], Y = y_labels[j])``."""

    cells: np.ndarray
    x_labels: tuple = field(default=())
    y_labels: tuple = field(default=())

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2 or cells.size == 0:
            raise InvalidJoint("joint must be a nonempty 2-d matrix")
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise InvalidJoint("joint cells must be finite and nonnegative")
        total = cells.sum()
        if total == 0:
            raise InvalidJoint("joint has no mass")
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidJoint(f"joint cells sum to {total!r}, not 1")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        xl = tuple(self.x_labels) or tuple(range(cells.shape[0]))
        yl = tuple(self.y_labels) or tuple(range(cells.shape[1]))
        if len(xl) != cells.shape[0] or len(yl) != cells.shape[1]:
            raise InvalidJoint("label counts do not match the joint's shape")
        object.__setattr__(self, "x_labels", xl)
        object.__setattr__(self, "y_labels", yl)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.cells.T, self.y_labels, self.x_labels)


@dataclass(frozen=True)
class Channel:
    """Row-stochastic matrix, ``rows[i, j] = P(output j | secret i)``."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.size == 0:
            raise InvalidChannel("channel must be a nonempty 2-d matrix")
        if not np.all(np.isfinite(rows)) or np.any(rows < 0) or np.any(rows > 1 + SUM_TOL):
            raise InvalidChannel("channel entries must lie in [0, 1]")
        bad = np.abs(rows.sum(axis=1) - 1.0) > SUM_TOL
        if np.any(bad):
            raise InvalidChannel(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))


def estimate_joint_categorical(xs: Sequence[Hashable], ys: Sequence[Hashable]) -> JointDistribution:
    """Normalized contingency table of two category sequences.

    Labels on both axes are ordered by first appearance.

    >>> j = estimate_joint_categorical(["a", "b", "a"], [0, 1, 0])
    >>> j.x_labels, j.y_labels
    (('a', 'b'), (0, 1))
    >>> j.cells.round(4).tolist()
    [[0.6667, 0.0], [0.0, 0.3333]]
    """
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise InvalidSamples(f"column lengths differ: {len(xs)} vs {len(ys)}")
    if not xs:
        raise InvalidSamples("cannot estimate a joint from zero samples")
    x_index: dict = {}
    y_index: dict = {}
    xi = np.fromiter((x_index.setdefault(v, len(x_index)) for v in xs), dtype=np.intp, count=len(xs))
    yi = np.fromiter((y_index.setdefault(v, len(y_index)) for v in ys), dtype=np.intp, count=len(ys))
    counts = np.zeros((len(x_index), len(y_index)))
    np.add.at(counts, (xi, yi), 1.0)
    return JointDistribution(counts / len(xs), tuple(x_index), tuple(y_index))


def _finite_column(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidSamples("empty sample column")
    if not np.all(np.isfinite(arr)):
        raise InvalidSamples("sample column contains NaN or infinite values")
    return arr


def discretize_numeric(values: Sequence[float], n_bins: int) -> np.ndarray:
    """Equal-width bin codes in ``[0, n_bins - 1]`` over the column's range.

    A constant column maps every value to bin 0.

    >>> discretize_numeric([0.0, 0.49, 0.51, 1.0], 2).tolist()
    [0, 0, 1, 1]
    """
    if n_bins < 1:
        raise InvalidSamples("n_bins must be at least 1")
    arr = _finite_column(values)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros(arr.size, dtype=int)
    width = (hi - lo) / n_bins
    codes = np.floor((arr - lo) / width).astype(int)
    return np.clip(codes, 0, n_bins - 1)


BandwidthLike = Union[BandwidthRule, str, float]


def _axis_bandwidth(values: np.ndarray, rule: BandwidthLike) -> float:
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        # a bare number is a bandwidth in units of the column's standard deviation
        if rule <= 0:
            raise ValueError("bandwidth scale must be positive")
        return float(rule) * float(np.std(values, ddof=1))
    return BandwidthRule(rule).bandwidth(values)


def kde_axis(values: np.ndarray, grid: int, rule: BandwidthLike) -> tuple[np.ndarray, float]:
    """Lattice points spanning ``[min - 3h, max + 3h]`` and the bandwidth ``h``."""
    h = _axis_bandwidth(values, rule)
    return np.linspace(values.min() - 3 * h, values.max() + 3 * h, grid), h


def estimate_joint_kde(
    xs: Sequence[float],
    ys: Sequence[float],
    grid: int = 32,
    bandwidth: BandwidthLike = BandwidthRule.SILVERMAN,
) -> JointDistribution:
    """Product-Gaussian kernel density of ``(xs, ys)`` evaluated on a grid.

    Each axis gets its own bandwidth. The returned cells are the density at
    the lattice points, renormalized to sum to one, so cell ``(i, j)`` stands
    for the neighbourhood of ``(gx[i], gy[j])``.
    """
    x = _finite_column(xs)
    y = _finite_column(ys)
    if x.size != y.size:
        raise InvalidSamples(f"column lengths differ: {x.size} vs {y.size}")
    if x.size < 2:
        raise InvalidSamples("kernel density needs at least two samples")
    if grid < 1:
        raise InvalidSamples("grid must be positive")
    for name, col in (("x", x), ("y", y)):
        if np.std(col, ddof=1) == 0:
            raise ConstantColumn(f"{name} column is constant")
    gx, hx = kde_axis(x, grid, bandwidth)
    gy, hy = kde_axis(y, grid, bandwidth)
    kx = np.exp(-0.5 * ((gx[:, None] - x[None, :]) / hx) ** 2)
    ky = np.exp(-0.5 * ((gy[:, None] - y[None, :]) / hy) ** 2)
    density = kx @ ky.T
    total = density.sum()
    if not math.isfinite(total) or total <= 0:
        raise InvalidSamples("kernel density underflowed on the grid")
    return JointDistribution(density / total, tuple(gx.tolist()), tuple(gy.tolist()))


def joint_to_prior_channel(joint: JointDistribution, direction: FlowDirection) -> tuple[Distribution, Channel]:
    """Factorize a joint into ``(prior, channel)`` for one flow direction.

    Direct flow uses the X marginal as the prior and ``P(y | x)`` as the
    channel; reverse flow is the same factorization of the transposed joint.
    Rows with zero marginal mass are dropped before dividing.
    """
    cells = joint.cells if FlowDirection(direction) is FlowDirection.DIRECT else joint.cells.T
    marginal = cells.sum(axis=1)
    keep = marginal > 0
    if not np.any(keep):
        raise InvalidJoint("joint has no mass")
    cells, marginal = cells[keep], marginal[keep]
    rows = cells / marginal[:, None]
    prior = marginal / marginal.sum()
    return Distribution(prior), Channel(rows)
