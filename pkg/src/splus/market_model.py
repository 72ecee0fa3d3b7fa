"""Contract coefficients, the exchange rule, power utility and the S(p) functional.

A market is described by the law ``tau`` of the ratio pairs ``(l, r)``.  Two
parties with s-plus ``v`` and ``w`` end a contract with::

    v' = l_I * v + r_I * w
    w' = r_II * v + l_II * w

where both ``(l_I, r_I)`` and ``(l_II, r_II)`` are distributed as ``tau``.
The smallest positive zero ``p_star`` of ``S(p) = E[l^p + r^p] - 1`` fixes the
relative risk-aversion index ``lam = (1 - p_star) / 2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

__all__ = [
    "TauDistribution",
    "Degenerate",
    "DiscreteMixture",
    "ProductBeta",
    "EmpiricalTau",
    "ContractCoefficients",
    "CouplingRule",
    "RiskProfile",
    "Admissibility",
    "InadmissibleTau",
    "DegenerateTau",
    "QuadratureError",
    "sample_coefficients",
    "sample_contracts",
    "apply_contract",
    "utility",
    "relative_rai",
    "welfare_increment",
    "s_function",
    "smallest_root",
    "check_admissible",
    "shift_tau",
    "SCAN_WINDOW",
    "SCAN_POINTS",
]

SCAN_WINDOW = (1e-3, 64.0)
SCAN_POINTS = 512
ROOT_TOL = 1e-10
QUAD_TOL = 1e-10


class InadmissibleTau(ValueError):
    """S(p) never becomes negative on the scan window."""


class DegenerateTau(ValueError):
    """tau freezes the dynamics (S vanishes identically), so no root is defined."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature for S(p) did not reach the requested tolerance."""


def _pow0(x: NDArray[np.floating], p: float) -> NDArray[np.floating]:
    # 0**0 := 1, and 0**p = 0 for p > 0; numpy already follows both rules
    return np.power(x, p)


# ---------------------------------------------------------------------------
# tau families
# ---------------------------------------------------------------------------


class TauDistribution:
    """Base class for laws of the ratio pair ``(l, r)``.

    Subclasses are immutable.  ``sample`` draws ``n`` pairs as two arrays,
    ``moment(p)`` returns ``E[l^p + r^p]`` and ``scaled`` multiplies the
    coordinates.
    """

    def sample(self, n: int, rng: np.random.Generator) -> tuple[NDArray, NDArray]:
        raise NotImplementedError

    def moment(self, p: float) -> float:
        raise NotImplementedError

    def scaled(self, scale_l: float, scale_r: float) -> "TauDistribution":
        raise NotImplementedError

    def support_max(self) -> float:
        """Largest coefficient value that can occur (``inf`` if unbounded)."""
        raise NotImplementedError

    def is_discrete(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_nonneg(name: str, *values: float) -> None:
    for v in values:
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"{name}: coefficients must be finite and non-negative, got {v!r}")


@dataclass(frozen=True)
class Degenerate(TauDistribution):
    """One-point law at ``(l, r)``."""

    l: float
    r: float

    def __post_init__(self) -> None:
        _check_nonneg("Degenerate", self.l, self.r)

    def sample(self, n, rng):
        return np.full(n, float(self.l)), np.full(n, float(self.r))

    def moment(self, p):
        return float(_pow0(np.float64(self.l), p) + _pow0(np.float64(self.r), p))

    def scaled(self, scale_l, scale_r):
        return Degenerate(self.l * scale_l, self.r * scale_r)

    def support_max(self):
        return float(max(self.l, self.r))

    def is_discrete(self):
        return True

    def atoms(self) -> tuple[NDArray, NDArray, NDArray]:
        return np.array([self.l], float), np.array([self.r], float), np.array([1.0])

    def to_dict(self):
        return {"kind": "degenerate", "l": self.l, "r": self.r}


@dataclass(frozen=True)
class DiscreteMixture(TauDistribution):
    """Finite mixture of atoms ``((l, r), weight)``."""

    atoms_: tuple[tuple[tuple[float, float], float], ...]

    def __init__(self, atoms: Sequence[tuple[tuple[float, float], float]]):
        atoms = tuple(((float(lr[0]), float(lr[1])), float(w)) for lr, w in atoms)
        if not atoms:
            raise ValueError("DiscreteMixture needs at least one atom")
        for (l, r), w in atoms:
            _check_nonneg("DiscreteMixture", l, r)
            if w < 0:
                raise ValueError(f"negative mixture weight {w}")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {total!r}, expected 1")
        object.__setattr__(self, "atoms_", atoms)

    def atoms(self) -> tuple[NDArray, NDArray, NDArray]:
        ls = np.array([a[0][0] for a in self.atoms_])
        rs = np.array([a[0][1] for a in self.atoms_])
        ws = np.array([a[1] for a in self.atoms_])
        return ls, rs, ws

    def sample(self, n, rng):
        ls, rs, ws = self.atoms()
        idx = rng.choice(len(ws), size=n, p=ws / ws.sum())
        return ls[idx], rs[idx]

    def moment(self, p):
        ls, rs, ws = self.atoms()
        return float(np.sum(ws * (_pow0(ls, p) + _pow0(rs, p))))

    def scaled(self, scale_l, scale_r):
        return DiscreteMixture([((l * scale_l, r * scale_r), w) for (l, r), w in self.atoms_])

    def support_max(self):
        ls, rs, _ = self.atoms()
        return float(max(ls.max(), rs.max()))

    def is_discrete(self):
        return True

    def to_dict(self):
        return {"kind": "mixture", "atoms": [[l, r, w] for (l, r), w in self.atoms_]}


@dataclass(frozen=True)
class ProductBeta(TauDistribution):
    """Independent ``l = scale_l * Beta(a_l, b_l)`` and ``r = scale_r * Beta(a_r, b_r)``."""

    a_l: float = 1.0
    b_l: float = 1.0
    a_r: float = 1.0
    b_r: float = 1.0
    scale_l: float = 1.0
    scale_r: float = 1.0

    def __post_init__(self) -> None:
        for name in ("a_l", "b_l", "a_r", "b_r", "scale_l", "scale_r"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"ProductBeta.{name} must be positive, got {v!r}")

    def sample(self, n, rng):
        l = self.scale_l * rng.beta(self.a_l, self.b_l, size=n)
        r = self.scale_r * rng.beta(self.a_r, self.b_r, size=n)
        return l, r

    @staticmethod
    def _beta_power_mean(a: float, b: float, p: float) -> float:
        # E[B^p] by quadrature against the algebraic weight x^(a-1) (1-x)^(b-1)
        val, err = integrate.quad(
            lambda x: x**p, 0.0, 1.0, weight="alg", wvar=(a - 1.0, b - 1.0),
            epsabs=QUAD_TOL, epsrel=1e-12, limit=200,
        )
        if not np.isfinite(val) or err > QUAD_TOL:
            raise QuadratureError(f"E[Beta({a},{b})^{p}] quadrature error {err:.3g}")
        return val / special.beta(a, b)

    def moment(self, p):
        if p == 0:
            return 2.0
        ml = self.scale_l**p * self._beta_power_mean(self.a_l, self.b_l, p)
        mr = self.scale_r**p * self._beta_power_mean(self.a_r, self.b_r, p)
        return float(ml + mr)

    def scaled(self, scale_l, scale_r):
        return ProductBeta(self.a_l, self.b_l, self.a_r, self.b_r,
                           self.scale_l * scale_l, self.scale_r * scale_r)

    def support_max(self):
        return float(max(self.scale_l, self.scale_r))

    def to_dict(self):
        return {"kind": "product_beta", "a_l": self.a_l, "b_l": self.b_l, "a_r": self.a_r,
                "b_r": self.b_r, "scale_l": self.scale_l, "scale_r": self.scale_r}


@dataclass(frozen=True)
class EmpiricalTau(TauDistribution):
    """Observed list of ``(l, r)`` pairs, each with equal frequency."""

    l: tuple[float, ...]
    r: tuple[float, ...]

    def __init__(self, pairs: ArrayLike):
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        if arr.shape[0] == 0:
            raise ValueError("EmpiricalTau needs at least one pair")
        _check_nonneg("EmpiricalTau", *arr.ravel())
        object.__setattr__(self, "l", tuple(arr[:, 0]))
        object.__setattr__(self, "r", tuple(arr[:, 1]))

    def atoms(self):
        n = len(self.l)
        return np.array(self.l), np.array(self.r), np.full(n, 1.0 / n)

    def sample(self, n, rng):
        idx = rng.integers(0, len(self.l), size=n)
        return np.asarray(self.l)[idx], np.asarray(self.r)[idx]

    def moment(self, p):
        ls, rs, _ = self.atoms()
        return float(np.mean(_pow0(ls, p) + _pow0(rs, p)))

    def scaled(self, scale_l, scale_r):
        return EmpiricalTau(np.column_stack([np.asarray(self.l) * scale_l,
                                             np.asarray(self.r) * scale_r]))

    def support_max(self):
        return float(max(max(self.l), max(self.r)))

    def is_discrete(self):
        return True

    def to_dict(self):
        return {"kind": "empirical", "pairs": [[l, r] for l, r in zip(self.l, self.r)]}


# ---------------------------------------------------------------------------
# contracts
# ---------------------------------------------------------------------------


class CouplingRule(str, enum.Enum):
    """Joint law of the two parties' coefficient pairs (only the marginals are fixed)."""

    INDEPENDENT = "independent"
    FULLY_CORRELATED = "fully_correlated"
    SYMMETRIC_SWAP = "symmetric_swap"


@dataclass(frozen=True)
class ContractCoefficients:
    l_I: float
    r_I: float
    l_II: float
    r_II: float

    def __post_init__(self) -> None:
        _check_nonneg("ContractCoefficients", self.l_I, self.r_I, self.l_II, self.r_II)


def sample_contracts(
    tau: TauDistribution, coupling: CouplingRule, n: int, rng: np.random.Generator
) -> tuple[NDArray, NDArray, NDArray, NDArray, NDArray]:
    """Draw ``n`` contracts as arrays ``(l_I, r_I, l_II, r_II, swap)``.

    ``swap`` is a boolean mask telling the caller to exchange the roles of the
    two parties; it is only ever set under ``SYMMETRIC_SWAP``.
    """
    coupling = CouplingRule(coupling)
    l1, r1 = tau.sample(n, rng)
    swap = np.zeros(n, dtype=bool)
    if coupling is CouplingRule.INDEPENDENT:
        l2, r2 = tau.sample(n, rng)
    elif coupling is CouplingRule.FULLY_CORRELATED:
        l2, r2 = l1.copy(), r1.copy()
    else:
        l2, r2 = l1.copy(), r1.copy()
        swap = rng.random(n) < 0.5
    return l1, r1, l2, r2, swap


def sample_coefficients(
    tau: TauDistribution, coupling: CouplingRule, rng: np.random.Generator
) -> ContractCoefficients:
    l1, r1, l2, r2, _ = sample_contracts(tau, coupling, 1, rng)
    return ContractCoefficients(float(l1[0]), float(r1[0]), float(l2[0]), float(r2[0]))


def apply_contract(v, w, c: ContractCoefficients):
    """Post-contract s-plus ``(v', w')``; works elementwise on arrays."""
    return c.l_I * v + c.r_I * w, c.r_II * v + c.l_II * w


# ---------------------------------------------------------------------------
# utility and welfare
# ---------------------------------------------------------------------------


def _check_lambda(lam: float) -> float:
    if not lam < 0.5:
        raise ValueError(f"relative risk-aversion index must be < 1/2, got {lam!r}")
    return 1.0 - 2.0 * lam


def utility(x, lam: float):
    """Power utility ``|x|^(1 - 2 lam) sign(x)``, normalised so that u(0)=0, u(1)=1."""
    p = _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.abs(x) ** p
    return out if out.ndim else float(out)


def relative_rai(u_prime: float, u_double_prime: float, x: float) -> float:
    """Relative risk-aversion index ``-x u''(x) / (2 u'(x))``."""
    if u_prime == 0:
        raise ZeroDivisionError("relative r.a.i. undefined where u'(x) = 0")
    return -x * u_double_prime / (2.0 * u_prime)


def welfare_increment(v, w, c: ContractCoefficients, lam: float):
    """Increment of the joint welfare of two parties produced by contract ``c``."""
    p = _check_lambda(lam)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    bracket_v = _pow0(np.float64(c.l_I), p) + _pow0(np.float64(c.r_II), p) - 1.0
    bracket_w = _pow0(np.float64(c.l_II), p) + _pow0(np.float64(c.r_I), p) - 1.0
    out = np.abs(v) ** p * bracket_v * np.sign(v) + np.abs(w) ** p * bracket_w * np.sign(w)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# S(p) and its roots
# ---------------------------------------------------------------------------


def s_function(tau: TauDistribution, p: float) -> float:
    """``S(p) = E[l^p + r^p] - 1`` with the convention ``0^0 = 1``."""
    if p < 0:
        raise ValueError(f"S(p) is defined for p >= 0, got {p!r}")
    return tau.moment(float(p)) - 1.0


@dataclass(frozen=True)
class RiskProfile:
    """Outcome of the root search: ``p_star`` and the implied index ``lam``."""

    lam: float
    p_star: float
    root_count: int
    second_root: Optional[float] = None
    scan_window: tuple[float, float] = SCAN_WINDOW
    tol: float = ROOT_TOL


class Admissibility(str, enum.Enum):
    ONE_ROOT = "one_root"
    TWO_ROOTS = "two_roots"
    INADMISSIBLE = "inadmissible"


def _bisect(f, a: float, b: float, fa: float, tol: float) -> float:
    # plain bisection keeping the sign of f(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _scan(tau: TauDistribution) -> tuple[NDArray, NDArray]:
    grid = np.geomspace(SCAN_WINDOW[0], SCAN_WINDOW[1], SCAN_POINTS)
    values = np.array([s_function(tau, p) for p in grid])
    return grid, values


def _roots(tau: TauDistribution, tol: float) -> list[float]:
    grid, values = _scan(tau)
    if np.all(np.abs(values) < 1e-14):
        raise DegenerateTau("S(p) vanishes identically: contracts leave every s-plus unchanged")
    if values.min() >= 0:
        raise InadmissibleTau(
            f"S(p) >= 0 on p in [{SCAN_WINDOW[0]:g}, {SCAN_WINDOW[1]:g}] "
            f"(min {values.min():.6g} at p={grid[values.argmin()]:.6g})"
        )
    f = lambda p: s_function(tau, p)
    roots: list[float] = []
    # S(0) = 1 > 0, so the segment [0, grid[0]] is scanned as well
    xs = np.concatenate([[0.0], grid])
    ys = np.concatenate([[1.0], values])
    for i in range(len(xs) - 1):
        y0, y1 = ys[i], ys[i + 1]
        if y1 == 0.0:
            if not roots or roots[-1] != xs[i + 1]:
                roots.append(float(xs[i + 1]))
            continue
        if y0 == 0.0:
            continue
        if (y0 > 0) != (y1 > 0):
            roots.append(float(_bisect(f, float(xs[i]), float(xs[i + 1]), float(y0), tol)))
        if len(roots) == 2:
            break
    return roots


def smallest_root(tau: TauDistribution, tol: float = ROOT_TOL) -> RiskProfile:
    """Smallest positive zero of S and the matching relative risk-aversion index.

    The window ``SCAN_WINDOW`` is scanned on a log-spaced grid; each sign change
    is refined by bisection.  Strict convexity of S allows at most two zeros.

    Raises
    ------
    InadmissibleTau
        If S stays non-negative on the whole window.
    DegenerateTau
        If S vanishes identically (e.g. ``tau`` concentrated on ``(1, 0)``).
    """
    roots = _roots(tau, tol)
    p_star = roots[0]
    second = roots[1] if len(roots) > 1 else None
    return RiskProfile(lam=(1.0 - p_star) / 2.0, p_star=p_star, root_count=len(roots),
                       second_root=second, tol=tol)


def check_admissible(tau: TauDistribution) -> tuple[Admissibility, tuple[float, ...]]:
    """Classify ``tau`` by the number of zeros of S; returns the zeros found."""
    try:
        roots = _roots(tau, ROOT_TOL)
    except (InadmissibleTau, DegenerateTau):
        return Admissibility.INADMISSIBLE, ()
    kind = Admissibility.TWO_ROOTS if len(roots) == 2 else Admissibility.ONE_ROOT
    return kind, tuple(roots)


def shift_tau(tau: TauDistribution, scale_l: float, scale_r: float) -> TauDistribution:
    """Rescale the ``l`` and ``r`` coordinates of ``tau``.

    Scales below one make the coefficients stochastically smaller, which lowers
    S pointwise: the smallest zero ``p_star`` moves down and ``lam`` goes up.
    """
    if not (scale_l > 0 and scale_r > 0):
        raise ValueError("scales must be positive")
    if scale_l == 1 and scale_r == 1:
        return tau
    return tau.scaled(scale_l, scale_r)


TauLike = Union[Degenerate, DiscreteMixture, ProductBeta, EmpiricalTau]
