"""Run configured scenarios and write their CSV artifacts.

Output layout of one run::

    <out>/snapshots/t_<time>.csv     column ``splus``
    <out>/lorenz_<time>.csv          columns ``theta,phi``
    <out>/cf_<time>.csv              columns ``xi,re,im`` (series solution)
    <out>/cf_empirical_<time>.csv    columns ``xi,re,im`` (sample average)
    <out>/report.csv                 one row per snapshot
    <out>/meta.txt                   ``key=value`` run metadata

Every file depends only on the config and the seed, never on the thread
count, so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .config import ScenarioConfig, SWEEP_AXES, build_initial, build_tau, initial_alpha
from .diagnostics import RegimeVerdict, classify_regime, escape_mass, ks_two_sample
from .inequality import DegenerateAtZero, EmpiricalDistribution, TooFewTailPoints, gini, lorenz_curve, tail_fit
from .kinetics import GaussianLaw, PointMass, cf_recursion, chaos_bound, simulate_agents, wild_samples
from .market_model import InadmissibleTau, DegenerateTau, RiskProfile, smallest_root
from .stable_laws import StableParams, stable_cf

__all__ = ["SnapshotSummary", "RunReport", "ScenarioError", "run_scenario", "sweep",
           "format_time"]

log = logging.getLogger(__name__)

LORENZ_POINTS = 101
REPORT_COLUMNS = ("solver", "t", "n", "mean", "gini", "tail_alpha", "tail_stderr", "tail_c1",
                  "tail_c2", "tail_unstable", "escape_mass", "ks_previous", "cf_gap")


class ScenarioError(RuntimeError):
    pass


@dataclass
class SnapshotSummary:
    solver: str
    t: float
    n: int
    mean: float = math.nan
    gini: float = math.nan
    tail_alpha: float = math.nan
    tail_stderr: float = math.nan
    tail_c1: float = math.nan
    tail_c2: float = math.nan
    tail_unstable: Optional[bool] = None
    escape_mass: float = math.nan
    ks_previous: float = math.nan
    cf_gap: float = math.nan


@dataclass
class RunReport:
    name: str
    seed: int
    p_star: float
    lam: float
    regime: Optional[RegimeVerdict]
    snapshots: list[SnapshotSummary] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)
    out_dir: Optional[Path] = None


def format_time(t: float) -> str:
    return f"{t:g}"


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _write_columns(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return path


def _cf_of(mu0):
    if isinstance(mu0, (GaussianLaw, PointMass)):
        return mu0.cf
    if isinstance(mu0, StableParams):
        return lambda xi: stable_cf(xi, mu0)
    raise ScenarioError(
        f"cf_recursion needs an initial law with a closed-form characteristic function, "
        f"not {type(mu0).__name__}"
    )


def _empirical_cf(values: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = np.empty(xi.size, complex)
    for i, x in enumerate(xi):
        out[i] = np.mean(np.exp(1j * x * values))
    return out


def _meta(config: ScenarioConfig, profile: Optional[RiskProfile], extra: dict) -> list[str]:
    lines = [
        f"name={config.name}",
        f"seed={config.seed}",
        f"tau={json.dumps(config.tau, sort_keys=True)}",
        f"coupling={config.coupling.value}",
        f"initial={json.dumps(config.initial, sort_keys=True)}",
        f"times={','.join(format_time(t) for t in config.times)}",
    ]
    if profile is not None:
        lines += [
            f"p_star={profile.p_star!r}",
            f"lambda={profile.lam!r}",
            f"root_count={profile.root_count}",
            f"second_root={profile.second_root!r}",
            f"scan_window={profile.scan_window[0]!r},{profile.scan_window[1]!r}",
            f"root_tol={profile.tol!r}",
        ]
    lines += [f"{k}={v}" for k, v in extra.items()]
    return lines


def _summarize(solver: str, t: float, values: np.ndarray, config: ScenarioConfig,
               previous: Optional[np.ndarray], out: Path, files: list) -> SnapshotSummary:
    diag = config.diagnostics
    d = EmpiricalDistribution(values)
    s = SnapshotSummary(solver, t, values.size, mean=float(np.mean(values)))
    tag = format_time(t)
    files.append(_write_columns(out / "snapshots" / f"t_{tag}.csv", ["splus"], [values]))
    try:
        if diag.gini:
            s.gini = gini(d)
        if diag.lorenz:
            curve = lorenz_curve(d)
            theta = np.linspace(0.0, 1.0, LORENZ_POINTS)
            files.append(_write_columns(out / f"lorenz_{tag}.csv", ["theta", "phi"],
                                        [theta, curve(theta)]))
    except DegenerateAtZero:
        log.info("snapshot t=%s is concentrated at zero; concentration skipped", tag)
    if diag.tail_fit:
        try:
            fit = tail_fit(d, diag.tail_k)
            s.tail_alpha, s.tail_stderr = fit.alpha, float(fit.stderr)
            s.tail_c1, s.tail_c2, s.tail_unstable = fit.c1, fit.c2, fit.unstable
        except TooFewTailPoints as exc:
            log.info("tail fit skipped at t=%s: %s", tag, exc)
    s.escape_mass = escape_mass(d, diag.escape_a)
    if diag.ks_previous and previous is not None:
        s.ks_previous = ks_two_sample(previous, values).statistic
    return s


def run_scenario(config: ScenarioConfig, threads: int = 1, out: Optional[Path] = None,
                 seed: Optional[int] = None) -> RunReport:
    """Solve ``config`` and write its artifacts to ``out`` (default ``config.output``).

    Raises
    ------
    InadmissibleTau, DegenerateTau
        After writing ``meta.txt`` with ``status=inadmissible``.
    ScenarioError
        For solver failures, with the scenario name in the message.
    """
    if seed is not None:
        config = config.replace("seed", int(seed))
    out = Path(out if out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    tau = build_tau(config.tau)
    try:
        profile = smallest_root(tau)
    except (InadmissibleTau, DegenerateTau) as exc:
        (out / "meta.txt").write_text("\n".join(
            _meta(config, None, {"status": "inadmissible", "error": str(exc)})) + "\n")
        raise type(exc)(f"scenario {config.name!r}: {exc}") from exc

    mu0 = build_initial(config.initial, profile.p_star)
    root = np.random.SeedSequence(config.seed)
    solver_seed, cf_seed = root.spawn(2)
    report = RunReport(config.name, config.seed, profile.p_star, profile.lam, None, out_dir=out)
    files = report.files
    extra: dict = {"status": "ok"}
    samples: dict[float, np.ndarray] = {}

    try:
        if config.solver is not None:
            kind = config.solver["kind"]
            extra["solver"] = kind
            if kind == "agents":
                n = int(config.solver["n_agents"])
                states = simulate_agents(n, tau, config.coupling, mu0, config.t_end,
                                         np.random.default_rng(solver_seed), times=config.times)
                samples = {st.time: st.splus for st in states}
                extra["n_agents"] = n
                extra["chaos_bound"] = repr(chaos_bound(config.t_end, n))
            else:
                m = int(config.solver["replicas"])
                per_time = solver_seed.spawn(len(config.times))
                for t, ss in zip(config.times, per_time):
                    samples[t] = wild_samples(mu0, tau, t, m, ss, threads=threads).values
                extra["replicas"] = m
    except Exception as exc:
        raise ScenarioError(f"scenario {config.name!r}: solver failed: {exc}") from exc

    previous = None
    for t in config.times:
        if t not in samples:
            continue
        s = _summarize(config.solver["kind"], t, samples[t], config, previous, out, files)
        report.snapshots.append(s)
        previous = samples[t]

    diag = config.diagnostics
    if config.cf_recursion is not None:
        c = config.cf_recursion
        xi = np.linspace(-c.get("xi_max", 3.0), c.get("xi_max", 3.0), c.get("points", 121))
        mu0_cf = _cf_of(mu0)
        for t in config.times:
            grid = cf_recursion(mu0_cf, tau, t, int(c["n_max"]), xi, c.get("grid_step", 0.01))
            files.append(_write_columns(out / f"cf_{format_time(t)}.csv", ["xi", "re", "im"],
                                        [xi, grid.values.real, grid.values.imag]))
            row = next((s for s in report.snapshots if s.t == t), None)
            if row is not None:
                row.cf_gap = float(np.max(np.abs(grid.values - _empirical_cf(samples[t], xi))))
            elif config.solver is None:
                report.snapshots.append(SnapshotSummary("cf_recursion", t, 0))
        extra["cf_truncation_bound"] = repr(float((1 - math.exp(-config.t_end)) ** c["n_max"]))
    if diag.cf and samples:
        xi = np.linspace(-diag.cf_xi_max, diag.cf_xi_max, diag.cf_points)
        for t, v in samples.items():
            phi = _empirical_cf(v, xi)
            files.append(_write_columns(out / f"cf_empirical_{format_time(t)}.csv",
                                        ["xi", "re", "im"], [xi, phi.real, phi.imag]))

    alpha = initial_alpha(config.initial, profile.p_star)
    if alpha is not None:
        evidence = [(s.t, s.escape_mass) for s in report.snapshots if not math.isnan(s.escape_mass)]
        report.regime = classify_regime(alpha, profile.p_star, evidence)
        extra["alpha_init"] = repr(float(alpha))
        extra["regime"] = report.regime.regime.value

    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for s in report.snapshots:
            w.writerow([_fmt(getattr(s, col)) for col in REPORT_COLUMNS])
    files.append(out / "report.csv")
    extra["escape_a"] = repr(diag.escape_a)
    (out / "meta.txt").write_text("\n".join(_meta(config, profile, extra)) + "\n")
    files.append(out / "meta.txt")
    return report


def _apply_axis(config: ScenarioConfig, axis: str, value: Any) -> ScenarioConfig:
    if axis == "tau.scale":
        return config.replace("tau.scale_l", value).replace("tau.scale_r", value)
    if axis == "t_end":
        kept = [t for t in config.times if t < value]
        return config.replace("times", kept + [value])
    return config.replace(axis, value)


def sweep(config: ScenarioConfig, axis: str, values: Sequence[Any], threads: int = 1,
          out: Optional[Path] = None) -> list[RunReport]:
    """One run per value of ``axis``; seeds are spawned from the base seed.

    Each run writes to ``<out>/<axis>_<index>``; ``<out>/sweep.csv`` collects
    ``p_star``, ``lambda``, the regime and the final-snapshot Gini per value.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    out = Path(out if out is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s.generate_state(1, np.uint64)[0])
             for s in np.random.SeedSequence(config.seed).spawn(len(values))]
    reports = []
    rows = []
    for i, (value, seed) in enumerate(zip(values, seeds)):
        cfg = _apply_axis(config, axis, value).replace("seed", seed)
        rep = run_scenario(cfg, threads=threads, out=out / f"{axis}_{i}")
        reports.append(rep)
        last = rep.snapshots[-1] if rep.snapshots else None
        rows.append([axis, _fmt(value), seed, _fmt(rep.p_star), _fmt(rep.lam),
                     rep.regime.regime.value if rep.regime else "",
                     _fmt(last.t) if last else "", _fmt(last.gini) if last else "",
                     _fmt(last.escape_mass) if last else ""])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "seed", "p_star", "lambda", "regime", "t_end", "gini",
                    "escape_mass"])
        w.writerows(rows)
    return reports
