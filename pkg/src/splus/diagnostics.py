"""Quantitative verdicts on simulated s-plus samples.

Two-sample Kolmogorov-Smirnov distances, a one-pass fixed-point residual for
the gain operator, regime classification, escape masses, the rescaled-CDF
stabilization check and tail-constant plateaus.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .inequality import EmpiricalDistribution, TooFewTailPoints
from .market_model import CouplingRule, TauDistribution, sample_contracts

__all__ = [
    "KSResult",
    "Regime",
    "RegimeVerdict",
    "StabilizationReport",
    "TailLimitReport",
    "ks_two_sample",
    "steady_state_residual",
    "classify_regime",
    "escape_mass",
    "scaled_cdf_check",
    "tail_limit_check",
    "KS_COEFFICIENTS",
    "TIE_TOL",
]

# asymptotic Kolmogorov quantiles c(a) with P(sqrt(nm/(n+m)) D > c(a)) -> a
KS_COEFFICIENTS = {0.01: 1.628, 0.05: 1.358}
TIE_TOL = 1e-9

Sample = Union[EmpiricalDistribution, ArrayLike]


def _as_dist(d: Sample) -> EmpiricalDistribution:
    return d if isinstance(d, EmpiricalDistribution) else EmpiricalDistribution(np.asarray(d))


class KSResult(NamedTuple):
    statistic: float
    critical_values: dict

    def exceeds(self, level: float = 0.01) -> bool:
        return self.statistic > self.critical_values[level]


def _step_cdf(d: EmpiricalDistribution, points: NDArray) -> NDArray:
    order = np.argsort(d.values, kind="stable")
    xs = d.values[order]
    cum = np.cumsum(d.probabilities()[order])
    idx = np.searchsorted(xs, points, side="right")
    return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def ks_two_sample(a: Sample, b: Sample) -> KSResult:
    """Sup distance between the two empirical CDFs and its 1% / 5% critical values.

    Weighted samples are supported; the critical values use the raw sample
    sizes, so they are only calibrated for equal weights.
    """
    a, b = _as_dist(a), _as_dist(b)
    pts = np.union1d(a.values, b.values)
    stat = float(np.max(np.abs(_step_cdf(a, pts) - _step_cdf(b, pts))))
    n, m = len(a), len(b)
    factor = np.sqrt((n + m) / (n * m))
    return KSResult(stat, {lvl: c * factor for lvl, c in KS_COEFFICIENTS.items()})


def steady_state_residual(sample: Sample, tau: TauDistribution,
                          coupling: CouplingRule, rng: np.random.Generator) -> KSResult:
    """KS distance between ``sample`` and one resampled application of the gain operator.

    Pairs ``(V1, V2)`` are drawn with replacement from the sample and
    ``(l, r) ~ tau``; the transformed values are ``l V1 + r V2``.  A law close to
    a steady state gives a distance of the size of the sampling noise.  Only
    the marginal of the first party's coefficients enters, so ``coupling`` does
    not change the result in law.
    """
    d = _as_dist(sample)
    n = len(d)
    if n < 1000:
        raise ValueError("steady_state_residual needs at least 1000 values")
    p = None if d.weights is None else d.weights
    i = rng.choice(n, size=n, p=p)
    j = rng.choice(n, size=n, p=p)
    l, r, _, _, _ = sample_contracts(tau, coupling, n, rng)
    moved = l * d.values[i] + r * d.values[j]
    return ks_two_sample(d, EmpiricalDistribution(moved))


class Regime(str, enum.Enum):
    CONSERVATION = "conservation"
    EGALITARIAN = "egalitarian"
    INEQUALITY = "inequality"


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    alpha_init: float
    p_star: float
    evidence: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if Regime(self.regime) is not _regime_of(self.alpha_init, self.p_star):
            raise ValueError("regime does not match the sign of alpha_init - p_star")


def _regime_of(alpha_init: float, p_star: float) -> Regime:
    if not (alpha_init > 0 and p_star > 0):
        raise ValueError("alpha_init and p_star must be positive")
    if abs(alpha_init - p_star) <= TIE_TOL:
        return Regime.CONSERVATION
    return Regime.EGALITARIAN if alpha_init > p_star else Regime.INEQUALITY


def classify_regime(alpha_init: float, p_star: float,
                    evidence: Sequence[tuple[float, float]] = ()) -> RegimeVerdict:
    """Long-time regime implied by the initial tail exponent and ``p_star``.

    Equal exponents (within ``TIE_TOL``) keep the tails; a lighter initial tail
    collapses to zero; a heavier one lets mass escape every bounded interval.
    ``evidence`` is carried along unchanged, typically an escape-mass
    trajectory ``[(t, mass), ...]``.
    """
    return RegimeVerdict(_regime_of(alpha_init, p_star), float(alpha_init), float(p_star),
                         tuple((float(t), float(m)) for t, m in evidence))


def escape_mass(sample: Sample, a: float) -> float:
    """Fraction of the sample with ``|x| >= a``."""
    if not a > 0:
        raise ValueError("a must be positive")
    d = _as_dist(sample)
    outside = np.abs(d.values) >= a
    if d.weights is None:
        return np.count_nonzero(outside) / outside.size
    return float(np.sum(d.weights[outside]))


@dataclass(frozen=True)
class StabilizationReport:
    times: tuple[float, ...]
    factors: tuple[float, ...]
    rescaled_ks: tuple[float, ...]
    raw_ks: tuple[float, ...]

    @property
    def stabilizing(self) -> bool:
        """Consecutive rescaled distances are non-increasing."""
        k = np.asarray(self.rescaled_ks)
        return bool(np.all(np.diff(k) <= 0))


def scaled_cdf_check(samples_by_time: Sequence[tuple[float, Sample]], alpha: float,
                     s_alpha: float) -> StabilizationReport:
    """Compare consecutive snapshots after dividing by ``exp(t S(alpha) / alpha)``.

    In the heavy-tailed regime the raw law drifts off to infinity while the
    rescaled one settles; the report holds both sequences of KS distances.
    """
    if len(samples_by_time) < 3:
        raise ValueError("need at least three time points")
    times = [float(t) for t, _ in samples_by_time]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be non-decreasing")
    raw = [_as_dist(s) for _, s in samples_by_time]
    factors = [float(np.exp(-t * s_alpha / alpha)) for t in times]
    scaled = [EmpiricalDistribution(d.values * f, d.weights) for d, f in zip(raw, factors)]
    pairs = range(len(raw) - 1)
    return StabilizationReport(
        tuple(times), tuple(factors),
        tuple(ks_two_sample(scaled[i], scaled[i + 1]).statistic for i in pairs),
        tuple(ks_two_sample(raw[i], raw[i + 1]).statistic for i in pairs),
    )


@dataclass(frozen=True)
class TailCurve:
    """``x^p * P_n(+-X >= x)`` along order-statistic thresholds of one tail."""

    thresholds: NDArray[np.float64]
    statistic: NDArray[np.float64]
    ranks: NDArray[np.int64]
    plateau: float
    stderr: float
    slope: float


@dataclass(frozen=True)
class TailLimitReport:
    p: float
    c1: float
    c2: float
    left: TailCurve
    right: TailCurve
    n: int
    sigmas: float = 3.0

    @property
    def left_consistent(self) -> bool:
        return abs(self.left.plateau - self.c1) <= self.sigmas * self.left.stderr

    @property
    def right_consistent(self) -> bool:
        return abs(self.right.plateau - self.c2) <= self.sigmas * self.right.stderr


def _tail_curve(mags: NDArray, n: int, p: float, k: int, points: int) -> TailCurve:
    asc = np.sort(mags)
    top = asc[::-1]
    m = top.size
    if m == 0:
        empty = np.empty(0)
        return TailCurve(empty, empty, np.empty(0, np.int64), 0.0, 0.0, float("nan"))
    hi = min(k, m)
    lo = max(1, min(10, hi))
    ranks = np.unique(np.geomspace(lo, hi, points).astype(np.int64))
    x = top[ranks - 1]
    counts = m - np.searchsorted(asc, x, side="left")
    stat = x**p * counts / n
    plateau = float(stat[-1])
    stderr = plateau / np.sqrt(ranks[-1])
    good = (x > 0) & (stat > 0)
    slope = (float(np.polyfit(np.log(x[good]), np.log(stat[good]), 1)[0])
             if good.sum() >= 3 else float("nan"))
    return TailCurve(x, stat, ranks, plateau, float(stderr), slope)


def tail_limit_check(sample: Sample, p_star: float, c1: float, c2: float,
                     k: int | None = None, points: int = 40,
                     sigmas: float = 3.0) -> TailLimitReport:
    """Empirical tail constants ``x^p P(X > x)`` and ``x^p P(X < -x)``.

    Each tail is evaluated at its order statistics ``x_(j)`` for log-spaced ranks
    ``j`` up to ``k``; the statistic there is ``x_(j)^p * j / n``.  The plateau is
    the value at rank ``k`` with binomial standard error ``plateau / sqrt(k)``.
    ``slope`` is the log-log trend of the statistic against ``x``: near zero
    for a Pareto tail of exponent ``p``, clearly negative for a lighter tail.

    Raises
    ------
    TooFewTailPoints
        If a tail whose constant is positive has fewer than ``k`` points.
    """
    d = _as_dist(sample)
    v = d.values
    n = v.size
    if k is None:
        k = int(min(1000, max(10, n // 200)))
    right = v[v > 0]
    left = -v[v < 0]
    for name, c, mags in (("right", c2, right), ("left", c1, left)):
        if c > 0 and mags.size < k:
            raise TooFewTailPoints(f"{name} tail has {mags.size} points, need {k}")
    return TailLimitReport(float(p_star), float(c1), float(c2),
                           _tail_curve(left, n, p_star, k, points),
                           _tail_curve(right, n, p_star, k, points), n, sigmas)
