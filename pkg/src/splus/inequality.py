"""Concentration of signed s-plus distributions.

Everything here works on the law of the absolute value ``|X|``: the extended
Lorenz curve of a signed distribution is the ordinary Lorenz curve of ``|X|``.
Two kinds of input are supported: samples (``EmpiricalDistribution``) and the
parametric weak Pareto family (``WeakParetoLaw``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

__all__ = [
    "EmpiricalDistribution",
    "UniformCore",
    "AtomCore",
    "WeakParetoLaw",
    "AbsoluteLaw",
    "LorenzCurve",
    "TailFit",
    "DegenerateAtZero",
    "InfiniteMean",
    "TooFewTailPoints",
    "abs_distribution",
    "lorenz",
    "lorenz_curve",
    "gini",
    "truncated_lorenz",
    "tail_fit",
    "sample_initial",
]


class DegenerateAtZero(ValueError):
    """All mass sits at zero; concentration is undefined."""


class InfiniteMean(ValueError):
    """The absolute value has infinite mean, so the Lorenz curve is undefined."""


class TooFewTailPoints(ValueError):
    pass


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A (possibly weighted) sample of s-plus values."""

    values: NDArray[np.float64]
    weights: Optional[NDArray[np.float64]] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("empty sample")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != values.shape:
                raise ValueError("weights and values differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be non-negative and sum to 1")
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.values.size

    def probabilities(self) -> NDArray[np.float64]:
        if self.weights is None:
            return np.full(self.values.size, 1.0 / self.values.size)
        return self.weights

    def mean(self) -> float:
        return float(np.dot(self.probabilities(), self.values))


# ---------------------------------------------------------------------------
# weak Pareto laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformCore:
    a: float
    b: float


@dataclass(frozen=True)
class AtomCore:
    location: float = 0.0


@dataclass(frozen=True)
class WeakParetoLaw:
    """Law with Pareto tails ``c1 x^-alpha`` (left) and ``c2 x^-alpha`` (right) beyond ``x0``.

    Inside ``(-x0, x0)`` the remaining mass ``1 - (c1 + c2) x0^-alpha`` is placed
    according to ``core``; with ``core=None`` the tails must carry all the mass.
    ``mean_centering`` shifts the whole law so that its mean is zero (only
    meaningful for ``alpha > 1``; ignored otherwise).
    """

    alpha: float
    c1: float
    c2: float
    x0: float = 1.0
    core: Union[None, UniformCore, AtomCore] = None
    mean_centering: bool = False
    shift: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.c1 < 0 or self.c2 < 0 or self.c1 + self.c2 <= 0:
            raise ValueError("tail constants must be non-negative with c1 + c2 > 0")
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")
        core_mass = self.core_mass
        if core_mass < -1e-12:
            raise ValueError("tail masses exceed 1: lower c1 + c2 or raise x0")
        if self.core is None and abs(core_mass) > 1e-12:
            raise ValueError(
                f"core=None requires c1 + c2 = x0**alpha; got core mass {core_mass:.3g}"
            )
        if isinstance(self.core, UniformCore):
            if not (-self.x0 <= self.core.a < self.core.b <= self.x0):
                raise ValueError("uniform core must satisfy -x0 <= a < b <= x0")
        elif isinstance(self.core, AtomCore):
            if not abs(self.core.location) < self.x0:
                raise ValueError("core atom must lie inside (-x0, x0)")
        if self.mean_centering and self.alpha > 1:
            object.__setattr__(self, "shift", -self.base_mean())

    @classmethod
    def two_sided(cls, alpha: float, x0: float = 1.0, right_share: float = 0.5,
                  mean_centering: bool = False) -> "WeakParetoLaw":
        """Pure Pareto tails on both sides: ``P(|X| > x) = (x0 / x)^alpha``."""
        total = x0**alpha
        return cls(alpha, (1 - right_share) * total, right_share * total, x0,
                   mean_centering=mean_centering)

    @classmethod
    def strict(cls, alpha: float, x0: float = 1.0) -> "WeakParetoLaw":
        """One-sided strict Pareto law on ``[x0, inf)``."""
        return cls.two_sided(alpha, x0, right_share=1.0)

    @property
    def left_mass(self) -> float:
        return self.c1 * self.x0 ** (-self.alpha)

    @property
    def right_mass(self) -> float:
        return self.c2 * self.x0 ** (-self.alpha)

    @property
    def core_mass(self) -> float:
        return 1.0 - self.left_mass - self.right_mass

    def base_mean(self) -> float:
        """Mean of the law before the centering shift (``inf``/``nan`` if ``alpha <= 1``)."""
        a = self.alpha
        if a <= 1:
            if self.c1 > 0 and self.c2 > 0:
                return float("nan")
            return float("inf") if self.c2 > 0 else float("-inf")
        tail = a * self.x0 ** (1 - a) / (a - 1)
        m = (self.c2 - self.c1) * tail
        if isinstance(self.core, UniformCore):
            m += self.core_mass * 0.5 * (self.core.a + self.core.b)
        elif isinstance(self.core, AtomCore):
            m += self.core_mass * self.core.location
        return float(m)

    def mean(self) -> float:
        return self.base_mean() + self.shift

    def _core_cdf(self, y: NDArray, left: bool) -> NDArray:
        if isinstance(self.core, UniformCore):
            return np.clip((y - self.core.a) / (self.core.b - self.core.a), 0.0, 1.0)
        if isinstance(self.core, AtomCore):
            return (y > self.core.location) if left else (y >= self.core.location)
        return np.zeros_like(y)

    def _base_cdf(self, y: NDArray, left: bool = False) -> NDArray:
        y = np.asarray(y, dtype=float)
        a, x0 = self.alpha, self.x0
        out = np.empty_like(y)
        lo = y < -x0
        hi = y >= x0
        mid = ~(lo | hi)
        with np.errstate(divide="ignore"):
            out[lo] = self.c1 * (-y[lo]) ** (-a)
            out[hi] = 1.0 - self.c2 * y[hi] ** (-a)
        out[mid] = self.left_mass + self.core_mass * self._core_cdf(y[mid], left)
        return out

    def cdf(self, x: ArrayLike) -> NDArray:
        return self._base_cdf(np.asarray(x, dtype=float) - self.shift)

    def sample(self, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
        """Inverse-CDF draws: Pareto tails scaled by ``c1``/``c2``, core otherwise."""
        u = rng.random(n)
        e = rng.random(n)
        out = np.empty(n)
        mL, mR = self.left_mass, self.right_mass
        left = u < mL
        right = u >= 1.0 - mR
        core = ~(left | right)
        # 1 - e lies in (0, 1], avoiding an infinite draw
        pareto = self.x0 * (1.0 - e) ** (-1.0 / self.alpha)
        out[left] = -pareto[left]
        out[right] = pareto[right]
        if isinstance(self.core, UniformCore):
            out[core] = self.core.a + (self.core.b - self.core.a) * e[core]
        elif isinstance(self.core, AtomCore):
            out[core] = self.core.location
        return out + self.shift


class AbsoluteLaw:
    """Law of ``|X|`` for ``X ~ WeakParetoLaw``.

    Provides the distribution function, survival function, integrals of the
    survival function and the quantile ``inf{x : A(x) > t}``.
    """

    def __init__(self, law: WeakParetoLaw):
        self.law = law
        s = law.shift
        self.tail_start = law.x0 + abs(s)
        pts = {0.0, abs(law.x0 - s), law.x0 + s if law.x0 + s > 0 else 0.0, self.tail_start}
        if isinstance(law.core, UniformCore):
            pts |= {abs(law.core.a + s), abs(law.core.b + s)}
        elif isinstance(law.core, AtomCore):
            pts.add(abs(law.core.location + s))
        self.breakpoints = sorted(p for p in pts if 0 <= p <= self.tail_start)

    def cdf(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        s = self.law.shift
        out = self.law._base_cdf(x - s) - self.law._base_cdf(-x - s, left=True)
        return np.where(x < 0, 0.0, np.clip(out, 0.0, 1.0))

    def sf(self, x: ArrayLike) -> NDArray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        tail = x >= self.tail_start
        out[~tail] = 1.0 - self.cdf(x[~tail])
        out[tail] = self._tail_sf(x[tail])
        return out

    def _tail_sf(self, x: NDArray) -> NDArray:
        law, s = self.law, self.law.shift
        return law.c2 * (x - s) ** (-law.alpha) + law.c1 * (x + s) ** (-law.alpha)

    def _tail_sf_integral(self, a: float, b: float) -> float:
        # closed form of the tail survival integral over [a, b], a >= tail_start
        law, s, al = self.law, self.law.shift, self.law.alpha

        def antider(c: float, y: float) -> float:
            if np.isinf(y):
                if al > 1:
                    return 0.0
                return np.inf if c > 0 else 0.0
            if al == 1:
                return c * np.log(y)
            return c * y ** (1 - al) / (1 - al)

        total = 0.0
        for c, off in ((law.c2, -s), (law.c1, s)):
            if c > 0:
                total += antider(c, b + off) - antider(c, a + off)
        return float(total)

    def survival_integral(self, a: float, b: float) -> float:
        """``int_a^b (1 - A(y)) dy`` for ``0 <= a <= b <= inf``."""
        if b <= a:
            return 0.0
        total = 0.0
        ts = self.tail_start
        if a < ts:
            hi = min(b, ts)
            pts = [p for p in self.breakpoints if a < p < hi]
            val, _ = integrate.quad(lambda y: float(self.sf(np.array([y]))[0]), a, hi,
                                    points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200)
            total += val
        if b > ts:
            total += self._tail_sf_integral(max(a, ts), b)
        return total

    def mean(self) -> float:
        return self.survival_integral(0.0, np.inf)

    def quantile(self, t: float) -> float:
        """``inf{x : A(x) > t}`` by bisection on the survival function."""
        target = 1.0 - t
        lo, hi = 0.0, max(self.tail_start, 1.0)
        while self.sf(np.array([hi]))[0] > target:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.sf(np.array([mid]))[0] > target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        return hi


def abs_distribution(d: Union[EmpiricalDistribution, WeakParetoLaw]):
    """Distribution of ``|X|``: an ``EmpiricalDistribution`` or an ``AbsoluteLaw``."""
    if isinstance(d, EmpiricalDistribution):
        if np.all(d.probabilities()[d.values != 0] == 0):
            raise DegenerateAtZero("all mass sits at zero")
        return EmpiricalDistribution(np.abs(d.values), d.weights)
    return AbsoluteLaw(d)


# ---------------------------------------------------------------------------
# Lorenz curve and Gini index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LorenzCurve:
    """Piecewise-linear Lorenz curve through ``(theta, phi)`` knots."""

    theta: NDArray[np.float64]
    phi: NDArray[np.float64]

    def __call__(self, theta: ArrayLike):
        out = np.interp(theta, self.theta, self.phi)
        return out if np.ndim(out) else float(out)

    def area(self) -> float:
        return float(np.sum(np.diff(self.theta) * (self.phi[1:] + self.phi[:-1]) * 0.5))

    def gini(self) -> float:
        return 1.0 - 2.0 * self.area()


def lorenz_curve(d: EmpiricalDistribution) -> LorenzCurve:
    """Knots of the extended Lorenz curve of a sample."""
    a = abs_distribution(d)
    order = np.argsort(a.values, kind="stable")
    x = a.values[order]
    w = a.probabilities()[order]
    mass = w * x
    total = mass.sum()
    theta = np.concatenate([[0.0], np.cumsum(w)])
    phi = np.concatenate([[0.0], np.cumsum(mass) / total])
    theta[-1] = 1.0
    phi[-1] = 1.0
    return LorenzCurve(theta, phi)


def _is_pure_pareto(law: WeakParetoLaw) -> bool:
    return law.core is None and law.shift == 0.0


def _check_finite_mean(law: WeakParetoLaw) -> None:
    if law.alpha <= 1:
        raise InfiniteMean(
            f"alpha={law.alpha} <= 1: |X| has infinite mean; use truncated_lorenz"
        )


def _law_lorenz_numeric(law: WeakParetoLaw, theta: float) -> float:
    A = AbsoluteLaw(law)
    x = A.quantile(theta)
    # int_0^theta Q(t) dt = int_0^x (1 - A) dy - (1 - theta) x
    num = A.survival_integral(0.0, x) - (1.0 - theta) * x
    return float(num / A.mean())


def lorenz(d: Union[EmpiricalDistribution, WeakParetoLaw], theta: float) -> float:
    """Value of the extended Lorenz curve at ``theta``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if isinstance(d, EmpiricalDistribution):
        return lorenz_curve(d)(theta)
    _check_finite_mean(d)
    if theta in (0.0, 1.0):
        return float(theta)
    if _is_pure_pareto(d):
        return float(1.0 - (1.0 - theta) ** (1.0 - 1.0 / d.alpha))
    return _law_lorenz_numeric(d, theta)


def _law_gini_numeric(law: WeakParetoLaw) -> float:
    A = AbsoluteLaw(law)
    M = A.mean()
    ts = A.tail_start
    sq = lambda y: float(A.sf(np.array([y]))[0]) ** 2
    core, _ = integrate.quad(sq, 0.0, ts, points=A.breakpoints[1:-1] or None,
                             epsabs=1e-13, epsrel=1e-12, limit=200)
    tail, _ = integrate.quad(sq, ts, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(1.0 - (core + tail) / M)


def gini(d: Union[EmpiricalDistribution, WeakParetoLaw]) -> float:
    """Gini index ``1 - 2 * (area under the Lorenz curve)``."""
    if isinstance(d, EmpiricalDistribution):
        return lorenz_curve(d).gini()
    _check_finite_mean(d)
    if _is_pure_pareto(d):
        return 1.0 / (2.0 * d.alpha - 1.0)
    return _law_gini_numeric(d)


def truncated_lorenz(alpha: float, omega: float, theta: float, law: WeakParetoLaw) -> float:
    """Lorenz value at ``theta`` of ``law`` conditioned on ``(-omega, omega)``.

    The absolute-value distribution function is ``A(x ^ omega) / A(omega)``,
    which has a finite mean for every ``alpha``.
    """
    if abs(alpha - law.alpha) > 1e-12:
        raise ValueError(f"alpha={alpha} does not match law.alpha={law.alpha}")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    A = AbsoluteLaw(law)
    A_om = float(A.cdf(np.array([omega]))[0])
    if A_om <= 0:
        raise ValueError("(-omega, omega) carries no mass")
    sf_om = float(A.sf(np.array([omega]))[0])
    x = min(A.quantile(theta * A_om), omega)
    num = A.survival_integral(0.0, x) - x * (1.0 - theta * A_om)
    den = A.survival_integral(0.0, omega) - omega * sf_om
    return float(np.clip(num / den, 0.0, theta))


# ---------------------------------------------------------------------------
# tail estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    alpha: float
    c1: float
    c2: float
    stderr: float
    k: int
    threshold: float
    alpha_half: float
    unstable: bool


def _hill(sorted_desc: NDArray, k: int) -> float:
    logs = np.log(sorted_desc[:k]) - np.log(sorted_desc[k])
    return float(1.0 / logs.mean())


def tail_fit(d: EmpiricalDistribution, k: int, drift_limit: float = 0.2) -> TailFit:
    """Hill estimate of the tail exponent of ``|X|`` from the ``k`` largest values.

    The tail constants follow from ``x^alpha * P(+-X > x)`` at the ``k``-th order
    statistic, split by sign.  The fit is repeated with ``k // 2``; a relative
    change above ``drift_limit`` flags the fit as ``unstable`` (no stable power
    tail in that range).
    """
    values = d.values
    n = values.size
    if k < 10 or n < 10 * k:
        raise TooFewTailPoints(f"need k >= 10 and n >= 10k (n={n}, k={k})")
    mags = np.abs(values)
    order = np.argsort(mags)[::-1]
    top = mags[order]
    if top[k] <= 0:
        raise TooFewTailPoints("order statistic k is zero")
    alpha = _hill(top, k)
    alpha_half = _hill(top, k // 2)
    u = top[k - 1]
    signs = np.sign(values[order[:k]])
    scale = u**alpha / n
    c2 = scale * np.count_nonzero(signs > 0)
    c1 = scale * np.count_nonzero(signs < 0)
    unstable = abs(alpha_half - alpha) / alpha > drift_limit
    return TailFit(alpha, float(c1), float(c2), alpha / np.sqrt(k), k, float(u),
                   alpha_half, bool(unstable))


def sample_initial(law: WeakParetoLaw, n: int, rng: np.random.Generator) -> EmpiricalDistribution:
    """``n`` i.i.d. draws from ``law``."""
    return EmpiricalDistribution(law.sample(n, rng))
