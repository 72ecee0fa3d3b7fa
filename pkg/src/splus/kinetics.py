"""Solvers for the kinetic s-plus equation.

Three routes to the law ``mu_t`` are provided:

* ``simulate_agents`` -- the N-agent pure jump process, simulated event by event;
* ``wild_samples`` -- exact draws of ``V_t = sum_j beta_j X_j`` from the Wild
  (McKean tree) representation;
* ``cf_recursion`` -- the characteristic function as a truncated Wild series.

``mixing_measure`` samples the martingale ``sum_j beta_j^p_star`` that sets the
random scale of the long-time stable mixture.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numba

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

from .inequality import EmpiricalDistribution, WeakParetoLaw
from .market_model import CouplingRule, TauDistribution, sample_contracts
from .stable_laws import StableParams, MixingMeasure, stable_sample

__all__ = [
    "AgentState",
    "WildWeights",
    "CfGrid",
    "WildBatch",
    "SimulationOverflow",
    "GaussianLaw",
    "PointMass",
    "as_sampler",
    "chaos_bound",
    "simulate_agents",
    "wild_sample",
    "wild_samples",
    "beta_step",
    "cf_recursion",
    "mixing_measure_sample",
    "mixing_measure",
    "replica_generators",
]

log = logging.getLogger(__name__)

OVERFLOW_LIMIT = 1e300
DEPTH_GUARD = 10_000_000
CHUNK = 4096


class SimulationOverflow(OverflowError):
    pass


# ---------------------------------------------------------------------------
# initial laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianLaw:
    sigma: float = 1.0
    mean: float = 0.0

    def sample(self, n, rng):
        return rng.normal(self.mean, self.sigma, n)

    def cf(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(1j * self.mean * xi - 0.5 * self.sigma**2 * xi**2)


@dataclass(frozen=True)
class PointMass:
    location: float = 0.0

    def sample(self, n, rng):
        return np.full(n, float(self.location))

    def cf(self, xi):
        return np.exp(1j * self.location * np.asarray(xi, dtype=float))


Sampler = Callable[[int, np.random.Generator], NDArray[np.float64]]
InitialLaw = Union[WeakParetoLaw, EmpiricalDistribution, StableParams, GaussianLaw, PointMass]


def as_sampler(mu0: Union[InitialLaw, Sampler]) -> Sampler:
    """Turn an initial law into a function ``(n, rng) -> draws``."""
    if isinstance(mu0, EmpiricalDistribution):
        vals, probs = mu0.values, mu0.probabilities()
        if mu0.weights is None:
            return lambda n, rng: vals[rng.integers(0, vals.size, n)]
        return lambda n, rng: vals[rng.choice(vals.size, size=n, p=probs)]
    if isinstance(mu0, StableParams):
        return lambda n, rng: np.asarray(stable_sample(mu0, rng, size=n), dtype=float)
    if hasattr(mu0, "sample"):
        return mu0.sample
    if callable(mu0):
        return mu0
    raise TypeError(f"cannot sample from {type(mu0).__name__}")


def replica_generators(seed, n: int) -> list[np.random.Generator]:
    """Independent streams derived deterministically from ``(seed, replica index)``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def chaos_bound(t: float, n_agents: int) -> float:
    """Total-variation bound ``6 (e^t - 1) / (N - 1)`` between one agent's law and ``mu_t``."""
    return 6.0 * math.expm1(t) / (n_agents - 1)


# ---------------------------------------------------------------------------
# N-agent jump process
# ---------------------------------------------------------------------------


@dataclass
class AgentState:
    splus: NDArray[np.float64]
    time: float
    event_count: int


@numba.njit(cache=True, nogil=True)
def _agent_events(x, ii, jj, l1, r1, l2, r2, swap, start, stop, limit):
    for e in range(start, stop):
        i = ii[e]
        j = jj[e]
        if swap[e]:
            i, j = j, i
        v = x[i]
        w = x[j]
        nv = l1[e] * v + r1[e] * w
        nw = r2[e] * v + l2[e] * w
        x[i] = nv
        x[j] = nw
        if abs(nv) > limit or abs(nw) > limit:
            return e
    return -1


def simulate_agents(
    n_agents: int,
    tau: TauDistribution,
    coupling: CouplingRule,
    mu0,
    t_end: float,
    rng: np.random.Generator,
    times: Optional[Sequence[float]] = None,
):
    """Run the N-agent exchange process from i.i.d. ``mu0`` initial s-plus.

    Contracts arrive at total rate ``N / 2``, each between a uniformly chosen
    pair, so every agent trades at rate one.  Returns the state at ``t_end``,
    or a list of states when snapshot ``times`` are given.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    snap = [float(t_end)] if times is None else [float(t) for t in times]
    if any(b < a for a, b in zip(snap, snap[1:])) or (snap and snap[0] < 0):
        raise ValueError("snapshot times must be non-negative and non-decreasing")
    horizon = snap[-1] if snap else 0.0
    x = np.array(as_sampler(mu0)(n_agents, rng), dtype=float)

    n_events = int(rng.poisson(0.5 * n_agents * horizon))
    event_times = np.sort(rng.uniform(0.0, horizon, n_events))
    ii = rng.integers(0, n_agents, n_events)
    jj = rng.integers(0, n_agents - 1, n_events)
    jj += jj >= ii
    l1, r1, l2, r2, swap = sample_contracts(tau, coupling, n_events, rng)

    states = []
    done = 0
    for t in snap:
        stop = int(np.searchsorted(event_times, t, side="right"))
        bad = _agent_events(x, ii, jj, l1, r1, l2, r2, swap, done, stop, OVERFLOW_LIMIT)
        if bad >= 0:
            raise SimulationOverflow(
                f"|s-plus| exceeded {OVERFLOW_LIMIT:g} at event {bad} (t={event_times[bad]:.4g})"
            )
        done = stop
        states.append(AgentState(x.copy(), t, done))
    return states[-1] if times is None else states


# ---------------------------------------------------------------------------
# Wild representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WildWeights:
    beta: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        if len(self.beta) < 1 or any(b < 0 for b in self.beta):
            raise ValueError("weights must be a non-empty list of non-negative numbers")

    @property
    def n(self) -> int:
        return len(self.beta)


def beta_step(w: WildWeights, i: int, l: float, r: float) -> WildWeights:
    """Split weight number ``i`` (1-based) into the adjacent pair ``(beta_i l, beta_i r)``."""
    if not 1 <= i <= w.n:
        raise IndexError(f"split index {i} outside 1..{w.n}")
    b = w.beta[i - 1]
    return WildWeights(w.beta[: i - 1] + (b * l, b * r) + w.beta[i:])


@numba.njit(cache=True, nogil=True)
def _wild_kernel(nu, u, l, r, x, out):
    # Splitting leaf i into (b l, b r) is stored as slot i <- b l, new slot <- b r.
    # The multiset of weights has the same law as the order-preserving split,
    # and the X_j are exchangeable, so V has the same law.
    buf = np.empty(nu.max())
    ps = 0
    px = 0
    for s in range(nu.size):
        n = nu[s]
        buf[0] = 1.0
        for k in range(1, n):
            i = int(u[ps] * k)
            b = buf[i]
            buf[i] = b * l[ps]
            buf[k] = b * r[ps]
            ps += 1
        acc = 0.0
        for j in range(n):
            acc += buf[j] * x[px + j]
        px += n
        out[s] = acc


@numba.njit(cache=True, nogil=True)
def _martingale_kernel(depth, u, lp, rp, out):
    buf = np.empty(depth)
    ps = 0
    for s in range(out.size):
        buf[0] = 1.0
        for k in range(1, depth):
            i = int(u[ps] * k)
            b = buf[i]
            buf[i] = b * lp[ps]
            buf[k] = b * rp[ps]
            ps += 1
        acc = 0.0
        for j in range(depth):
            acc += buf[j]
        out[s] = acc


def _draw_depths(t: float, n: int, rng: np.random.Generator) -> tuple[NDArray, int]:
    nu = rng.geometric(np.exp(-t), size=n)
    resampled = 0
    while True:
        big = nu > DEPTH_GUARD
        if not big.any():
            return nu.astype(np.int64), resampled
        resampled += int(big.sum())
        log.warning("Wild depth above %d drawn %d times; resampling", DEPTH_GUARD, big.sum())
        nu[big] = rng.geometric(np.exp(-t), size=int(big.sum()))


def _wild_chunk(sampler: Sampler, tau: TauDistribution, t: float, n: int,
                rng: np.random.Generator) -> tuple[NDArray, int, int]:
    nu, resampled = _draw_depths(t, n, rng)
    splits = int(nu.sum() - n)
    u = rng.random(splits)
    l, r = tau.sample(splits, rng)
    x = np.asarray(sampler(int(nu.sum()), rng), dtype=float)
    out = np.empty(n)
    _wild_kernel(nu, u, np.ascontiguousarray(l, float), np.ascontiguousarray(r, float), x, out)
    return out, resampled, int(nu.max())


def wild_sample(mu0, tau: TauDistribution, t: float, rng: np.random.Generator) -> float:
    """One draw of ``V_t``; the coupling rule plays no role in this representation."""
    if t < 0:
        raise ValueError("t must be non-negative")
    out, _, _ = _wild_chunk(as_sampler(mu0), tau, t, 1, rng)
    return float(out[0])


@dataclass
class WildBatch:
    values: NDArray[np.float64]
    t: float
    depth_resamples: int = 0
    max_depth: int = 1
    guard_probability: float = 0.0


def wild_samples(mu0, tau: TauDistribution, t: float, n: int, seed, threads: int = 1,
                 chunk: int = CHUNK) -> WildBatch:
    """``n`` independent draws of ``V_t``.

    Draws are produced in fixed-size chunks, each with its own stream spawned
    from ``seed``; the result does not depend on ``threads``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    sampler = as_sampler(mu0)
    sizes = [chunk] * (n // chunk) + ([n % chunk] if n % chunk else [])
    gens = replica_generators(seed, len(sizes))
    work = lambda args: _wild_chunk(sampler, tau, t, args[0], args[1])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, zip(sizes, gens)))
    else:
        parts = [work(a) for a in zip(sizes, gens)]
    values = np.concatenate([p[0] for p in parts]) if parts else np.empty(0)
    guard_p = float(np.exp(DEPTH_GUARD * np.log1p(-np.exp(-t)))) if t > 0 else 0.0
    return WildBatch(values, t, sum(p[1] for p in parts),
                     max((p[2] for p in parts), default=1), guard_p)


def mixing_measure_sample(tau: TauDistribution, p_star: float, depth: int,
                          rng: np.random.Generator) -> float:
    """``M_n = sum_j beta_j^p_star`` for one Wild tree grown to ``depth`` leaves."""
    return float(mixing_measure(tau, p_star, depth, 1, rng).samples[0])


def mixing_measure(tau: TauDistribution, p_star: float, depth: int, n: int,
                   rng: np.random.Generator) -> MixingMeasure:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    out = np.empty(n)
    per = depth - 1
    for start in range(0, n, CHUNK):
        m = min(CHUNK, n - start)
        u = rng.random(m * per)
        l, r = tau.sample(m * per, rng)
        part = np.empty(m)
        _martingale_kernel(depth, u, np.power(l, p_star), np.power(r, p_star), part)
        out[start:start + m] = part
    return MixingMeasure(out, depth)


# ---------------------------------------------------------------------------
# characteristic-function recursion
# ---------------------------------------------------------------------------


@dataclass
class CfGrid:
    xi_points: NDArray[np.float64]
    values: NDArray[np.complex128]
    t: float
    truncation_n: int
    truncation_error_bound: float
    clamped_points: int = 0
    grid_step: float = 0.0
    meta: dict = field(default_factory=dict)


def cf_recursion(
    mu0_cf: Callable[[NDArray], NDArray],
    tau: TauDistribution,
    t: float,
    n_max: int,
    xi_points: ArrayLike,
    grid_step: float = 0.01,
) -> CfGrid:
    """Truncated Wild series for the characteristic function of ``mu_t``.

    ``q_1 = mu0_cf`` and ``q_n(xi) = 1/(n-1) sum_j E[q_j(l xi) q_{n-j}(r xi)]``
    for a discrete ``tau``.  Each ``q_n`` lives on a uniform working grid that
    covers ``max(l, r, 1) * max|xi|``; values at the scaled abscissae come from
    cubic splines.  Abscissae beyond the working grid are clamped to its edge
    and counted in ``clamped_points``.
    """
    if not tau.is_discrete():
        raise TypeError("cf_recursion needs a discrete tau")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    xi_points = np.asarray(xi_points, dtype=float)
    ls, rs, ws = tau.atoms()
    ext = max(float(ls.max()), float(rs.max()), 1.0)
    half = max(float(np.abs(xi_points).max()), grid_step) * ext
    m = int(np.ceil(half / grid_step))
    grid = np.linspace(-m * grid_step, m * grid_step, 2 * m + 1)
    lim = grid[-1]

    clamped = 0
    scaled = []
    for l, r in zip(ls, rs):
        pl, pr = l * grid, r * grid
        clamped += int(np.count_nonzero(np.abs(pl) > lim) + np.count_nonzero(np.abs(pr) > lim))
        scaled.append((np.clip(pl, -lim, lim), np.clip(pr, -lim, lim)))

    q_grid = np.asarray(mu0_cf(grid), dtype=complex)
    # QL[a][j] = q_{j+1}(l_a * grid), QR likewise
    QL = [np.empty((n_max, grid.size), complex) for _ in ws]
    QR = [np.empty((n_max, grid.size), complex) for _ in ws]

    def store(j: int, q: NDArray) -> None:
        spline = CubicSpline(grid, q)
        for a, (pl, pr) in enumerate(scaled):
            QL[a][j] = spline(pl)
            QR[a][j] = spline(pr)

    e = np.exp(-t)
    weights = e * (1.0 - e) ** np.arange(n_max)
    acc = np.zeros(grid.size, complex)
    store(0, q_grid)
    for n in range(2, n_max + 1):
        if weights[n - 1] == 0.0:
            break
        q = np.zeros(grid.size, complex)
        for a, w in enumerate(ws):
            q += w * np.einsum("jg,jg->g", QL[a][: n - 1], QR[a][n - 2:: -1])
        q /= n - 1
        acc += weights[n - 1] * q
        if n < n_max:
            store(n - 1, q)

    values = weights[0] * np.asarray(mu0_cf(xi_points), dtype=complex)
    if np.any(acc != 0):
        values = values + CubicSpline(grid, acc)(xi_points)
    bound = float((1.0 - e) ** n_max)
    if clamped:
        log.warning("cf_recursion clamped %d scaled abscissae to the grid edge", clamped)
    return CfGrid(xi_points, values, float(t), int(n_max), bound, clamped, grid_step,
                  {"grid_half_width": float(lim), "extension": ext})
