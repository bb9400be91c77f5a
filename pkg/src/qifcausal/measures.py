"""Vulnerabilities, leakages and capacity of a (prior, channel) pair.

Three measure families are supported:

* Bayes vulnerability, the probability of guessing the secret in one try
  (identity gain function);
* Bayes risk, the probability that the best single guess is wrong;
* Shannon uncertainty, the entropy in bits (expected ``-log2`` loss of the
  best probabilistic guess).

Bayes vulnerability is gain-flavored (higher means more exposed); the other
two are losses. Leakages are oriented so that larger values always mean more
information flows through the channel.

The generic g-vulnerability machinery (:class:`GainFunction`,
:func:`g_vulnerability`, :func:`posterior_g_vulnerability` and their loss
counterparts) is exposed for experimentation; only the three families above
are used as features.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

import numpy as np

from .channel import Channel, Distribution
from .errors import DegenerateLeakage, DimensionMismatch

DEFAULT_CAP = 1e6


class MeasureKind(enum.Enum):
    BAYES_VULNERABILITY = "bayes_vulnerability"
    BAYES_RISK = "bayes_risk"
    SHANNON = "shannon"

    @property
    def is_gain(self) -> bool:
        return self is MeasureKind.BAYES_VULNERABILITY


class LeakageMode(enum.Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class GainFunction:
    """A gain ``g(w, x)`` over a finite action set and secrets ``0..n-1``.

    Used as a loss function by :func:`l_uncertainty` and
    :func:`posterior_l_uncertainty`.
    """

    evaluator: Callable[[Hashable, int], float]
    actions: tuple

    def matrix(self, n_secrets: int) -> np.ndarray:
        """Gain table with one row per action and one column per secret."""
        return np.array([[self.evaluator(w, x) for x in range(n_secrets)] for w in self.actions], dtype=float)


def identity_gain(n_secrets: int) -> GainFunction:
    """Gain 1 for guessing the secret exactly, 0 otherwise."""
    return GainFunction(lambda w, x: 1.0 if w == x else 0.0, tuple(range(n_secrets)))


def shannon_loss(w: Sequence[float], x: int) -> float:
    """``-log2 w[x]`` for an action ``w`` that is itself a distribution on secrets."""
    p = w[x]
    return float("inf") if p <= 0 else -float(np.log2(p))


def shannon_loss_function(actions: Sequence[Sequence[float]]) -> GainFunction:
    return GainFunction(shannon_loss, tuple(tuple(a) for a in actions))


def _check_dims(prior: Distribution, ch: Channel) -> None:
    if prior.support_size != ch.n_inputs:
        raise DimensionMismatch(f"prior has {prior.support_size} entries but channel has {ch.n_inputs} rows")


def g_vulnerability(gain: GainFunction, prior: Distribution) -> float:
    """``max_w sum_x prior[x] g(w, x)``."""
    return float(np.max(gain.matrix(prior.support_size) @ prior.probs))


def posterior_g_vulnerability(gain: GainFunction, prior: Distribution, ch: Channel) -> float:
    """``sum_y max_w sum_x prior[x] C[x, y] g(w, x)``."""
    _check_dims(prior, ch)
    joint = prior.probs[:, None] * ch.rows
    return float(np.sum(np.max(gain.matrix(prior.support_size) @ joint, axis=0)))


def l_uncertainty(loss: GainFunction, prior: Distribution) -> float:
    """``min_w sum_x prior[x] l(w, x)``, treating ``0 * inf`` as 0."""
    table = loss.matrix(prior.support_size)
    with np.errstate(invalid="ignore"):
        weighted = np.where(prior.probs > 0, table * prior.probs, 0.0)
    return float(np.min(weighted.sum(axis=1)))


def posterior_l_uncertainty(loss: GainFunction, prior: Distribution, ch: Channel) -> float:
    _check_dims(prior, ch)
    table = loss.matrix(prior.support_size)
    joint = prior.probs[:, None] * ch.rows
    total = 0.0
    for col in joint.T:
        with np.errstate(invalid="ignore"):
            weighted = np.where(col > 0, table * col, 0.0)
        total += float(np.min(weighted.sum(axis=1)))
    return total


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def prior_measure(kind: MeasureKind, prior: Distribution) -> float:
    """Measure of the secret before anything is observed.

    >>> prior_measure(MeasureKind.SHANNON, Distribution.uniform(4))
    2.0
    """
    kind = MeasureKind(kind)
    if kind is MeasureKind.BAYES_VULNERABILITY:
        return float(prior.probs.max())
    if kind is MeasureKind.BAYES_RISK:
        return 1.0 - float(prior.probs.max())
    return _entropy_bits(prior.probs)


def posterior_measure(kind: MeasureKind, prior: Distribution, ch: Channel) -> float:
    """Expected measure of the secret after observing the channel output."""
    kind = MeasureKind(kind)
    _check_dims(prior, ch)
    joint = prior.probs[:, None] * ch.rows
    if kind is not MeasureKind.SHANNON:
        vuln = float(joint.max(axis=0).sum())
        return vuln if kind is MeasureKind.BAYES_VULNERABILITY else 1.0 - vuln
    # H(X | Y) = -sum J log2(J / p_y)
    p_y = joint.sum(axis=0)
    mask = joint > 0
    ratio = np.ones_like(joint)
    np.divide(joint, np.broadcast_to(p_y, joint.shape), out=ratio, where=mask)
    return float(-np.sum(joint[mask] * np.log2(ratio[mask])))


def leakage(kind: MeasureKind, mode: LeakageMode, prior: Distribution, ch: Channel) -> float:
    """Posterior-versus-prior comparison, oriented so larger means more flow.

    Raises :class:`DegenerateLeakage` when a multiplicative leakage would
    divide by zero.

    >>> pi = Distribution([0.5, 0.5])
    >>> ch = Channel([[0.8, 0.2], [0.3, 0.7]])
    >>> round(leakage(MeasureKind.BAYES_VULNERABILITY, LeakageMode.MULTIPLICATIVE, pi, ch), 12)
    1.5
    """
    kind, mode = MeasureKind(kind), LeakageMode(mode)
    before = prior_measure(kind, prior)
    after = posterior_measure(kind, prior, ch)
    if kind.is_gain:
        num, den = after, before
    else:
        num, den = before, after
    if mode is LeakageMode.ADDITIVE:
        return num - den
    if den == 0:
        raise DegenerateLeakage(f"{kind.value} multiplicative leakage has a zero denominator")
    return num / den


def bayes_capacity(ch: Channel) -> float:
    """Multiplicative Bayes capacity in bits, ``log2 sum_y max_x C[x, y]``.

    This is the largest multiplicative Bayes leakage over all priors, reached
    at the uniform prior.
    """
    return max(0.0, float(np.log2(ch.rows.max(axis=0).sum())))
