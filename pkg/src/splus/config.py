"""Scenario configuration: a versioned YAML schema with full validation.

A scenario file looks like::

    schema_version: 1
    name: conservation_e
    seed: 20261016
    tau: {kind: degenerate, l: 0.9, r: 0.3}
    coupling: independent
    initial: {kind: pareto, alpha: p_star, x0: 1.0, mean_centering: true}
    solver: {kind: wild, replicas: 100000}
    times: [1, 2, 4]

Errors are reported with flat key paths such as ``tau.l`` and all problems
are collected before raising.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .inequality import AtomCore, UniformCore, WeakParetoLaw
from .kinetics import GaussianLaw, PointMass
from .market_model import (
    CouplingRule,
    Degenerate,
    DiscreteMixture,
    EmpiricalTau,
    ProductBeta,
    TauDistribution,
    shift_tau,
)
from .stable_laws import StableParams, k_gamma_from_tails

__all__ = [
    "SCHEMA_VERSION",
    "ConfigParseError",
    "ConfigValidationError",
    "ScenarioConfig",
    "Diagnostics",
    "load_config",
    "parse_config",
    "validate",
    "build_tau",
    "build_initial",
    "initial_alpha",
    "preset_names",
    "preset_path",
    "SWEEP_AXES",
]

SCHEMA_VERSION = 1
SOLVERS = ("agents", "wild")
INITIAL_KINDS = ("pareto", "weak_pareto", "gaussian", "point_mass", "stable")
TAU_KINDS = ("degenerate", "mixture", "product_beta", "empirical")
SWEEP_AXES = ("tau.scale", "tau.scale_l", "tau.scale_r", "initial.alpha", "t_end",
              "solver.n_agents")


class ConfigParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ConfigValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Diagnostics:
    gini: bool = True
    lorenz: bool = True
    tail_fit: bool = True
    tail_k: int = 100
    escape_a: float = 1.0
    ks_previous: bool = True
    cf: bool = False
    cf_xi_max: float = 3.0
    cf_points: int = 61


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario.  ``raw`` keeps the normalized mapping for sweeps."""

    name: str
    seed: int
    tau: dict
    coupling: CouplingRule
    initial: dict
    solver: Optional[dict]
    cf_recursion: Optional[dict]
    times: tuple[float, ...]
    diagnostics: Diagnostics
    output: str
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def replace(self, key: str, value: Any) -> "ScenarioConfig":
        """A new validated config with the flat key ``key`` set to ``value``."""
        raw = copy.deepcopy(self.raw)
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
        return validate(raw)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigParseError(f"{source}: {problem}", line) from None
    if not isinstance(data, dict):
        raise ConfigParseError(f"{source}: top level must be a mapping", 1)
    return validate(data)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read and validate a scenario file; a bare preset name is also accepted."""
    p = Path(path)
    if not p.exists() and str(path) in preset_names():
        p = preset_path(str(path))
    if not p.exists():
        raise FileNotFoundError(f"no such config or preset: {path}")
    return parse_config(p.read_text(), str(p))


def preset_names() -> list[str]:
    root = resources.files("splus") / "presets"
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".yaml"))


def preset_path(name: str) -> Path:
    return Path(str(resources.files("splus") / "presets" / f"{name}.yaml"))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _num(errors: list, d: dict, key: str, path: str, default=None, positive=False,
         nonneg=False, allow=()):
    if key not in d:
        if default is None:
            errors.append(f"{path}.{key}: missing")
        return default
    v = d[key]
    if v in allow:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{path}.{key}: expected a number, got {v!r}")
        return default
    if positive and not v > 0:
        errors.append(f"{path}.{key}: must be positive")
    if nonneg and v < 0:
        errors.append(f"{path}.{key}: must be non-negative")
    return float(v)


def _int(errors: list, d: dict, key: str, path: str, default=None, minimum=1):
    if key not in d:
        if default is None:
            errors.append(f"{path}.{key}: missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        errors.append(f"{path}.{key}: expected an integer, got {v!r}")
        return default
    if v < minimum:
        errors.append(f"{path}.{key}: must be at least {minimum}")
    return v


def _check_tau(errors: list, t: Any) -> None:
    if not isinstance(t, dict):
        errors.append("tau: expected a mapping")
        return
    kind = t.get("kind")
    if kind not in TAU_KINDS:
        errors.append(f"tau.kind: expected one of {TAU_KINDS}, got {kind!r}")
        return
    if kind == "degenerate":
        _num(errors, t, "l", "tau", nonneg=True)
        _num(errors, t, "r", "tau", nonneg=True)
    elif kind == "mixture":
        atoms = t.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            errors.append("tau.atoms: expected a non-empty list of {l, r, weight}")
        else:
            for i, a in enumerate(atoms):
                if not isinstance(a, dict):
                    errors.append(f"tau.atoms[{i}]: expected a mapping")
                    continue
                for key in ("l", "r", "weight"):
                    _num(errors, a, key, f"tau.atoms[{i}]", nonneg=True)
    elif kind == "product_beta":
        for key in ("a_l", "b_l", "a_r", "b_r"):
            _num(errors, t, key, "tau", positive=True)
    else:
        pairs = t.get("pairs")
        if not isinstance(pairs, list) or not pairs:
            errors.append("tau.pairs: expected a non-empty list of [l, r]")
    for key in ("scale_l", "scale_r"):
        _num(errors, t, key, "tau", default=1.0, positive=True)


def _check_initial(errors: list, d: Any) -> None:
    if not isinstance(d, dict):
        errors.append("initial: expected a mapping")
        return
    kind = d.get("kind")
    if kind not in INITIAL_KINDS:
        errors.append(f"initial.kind: expected one of {INITIAL_KINDS}, got {kind!r}")
        return
    if kind in ("pareto", "weak_pareto", "stable"):
        _num(errors, d, "alpha", "initial", positive=True, allow=("p_star",))
    if kind == "pareto":
        _num(errors, d, "x0", "initial", default=1.0, positive=True)
        share = _num(errors, d, "right_share", "initial", default=0.5)
        if share is not None and not 0 <= share <= 1:
            errors.append("initial.right_share: must lie in [0, 1]")
    elif kind == "weak_pareto":
        _num(errors, d, "c1", "initial", nonneg=True)
        _num(errors, d, "c2", "initial", nonneg=True)
        _num(errors, d, "x0", "initial", default=1.0, positive=True)
        core = d.get("core")
        if core is not None and not (isinstance(core, dict) and core.get("kind") in ("atom", "uniform")):
            errors.append("initial.core: expected {kind: atom, location} or {kind: uniform, a, b}")
    elif kind == "stable":
        _num(errors, d, "c1", "initial", nonneg=True)
        _num(errors, d, "c2", "initial", nonneg=True)
        _num(errors, d, "chi", "initial", default=0.0)
    elif kind == "gaussian":
        _num(errors, d, "sigma", "initial", positive=True)
        _num(errors, d, "mean", "initial", default=0.0)
    else:
        _num(errors, d, "location", "initial", default=0.0)


def _check_solvers(errors: list, solver: Any, cfr: Any) -> None:
    if solver is None and cfr is None:
        errors.append("solver: at least one of solver or cf_recursion is required")
    if solver is not None:
        if not isinstance(solver, dict) or solver.get("kind") not in SOLVERS:
            errors.append(f"solver.kind: expected one of {SOLVERS}")
        elif solver["kind"] == "agents":
            _int(errors, solver, "n_agents", "solver", minimum=2)
        else:
            _int(errors, solver, "replicas", "solver")
    if cfr is not None:
        if not isinstance(cfr, dict):
            errors.append("cf_recursion: expected a mapping")
        else:
            _int(errors, cfr, "n_max", "cf_recursion")
            _num(errors, cfr, "xi_max", "cf_recursion", default=3.0, positive=True)
            _int(errors, cfr, "points", "cf_recursion", default=121, minimum=2)
            _num(errors, cfr, "grid_step", "cf_recursion", default=0.01, positive=True)


def _check_diagnostics(errors: list, d: Any) -> Diagnostics:
    if d is None:
        return Diagnostics()
    if not isinstance(d, dict):
        errors.append("diagnostics: expected a mapping")
        return Diagnostics()
    known = Diagnostics.__dataclass_fields__
    for key in d:
        if key not in known:
            errors.append(f"diagnostics.{key}: unknown toggle")
    try:
        return Diagnostics(**{k: v for k, v in d.items() if k in known})
    except TypeError as exc:
        errors.append(f"diagnostics: {exc}")
        return Diagnostics()


def validate(data: dict) -> ScenarioConfig:
    """Check a parsed mapping and build a ``ScenarioConfig``; every problem is reported."""
    errors: list[str] = []
    version = data.get("schema_version")
    if version is None:
        errors.append("schema_version: missing")
    elif version != SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")
    seed = data.get("seed")
    if seed is None:
        errors.append("seed: missing (a fixed seed is required)")
    elif isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        errors.append("seed: expected a 64-bit non-negative integer")
    coupling = data.get("coupling", "independent")
    try:
        coupling = CouplingRule(coupling)
    except ValueError:
        errors.append(f"coupling: expected one of {[c.value for c in CouplingRule]}")
    _check_tau(errors, data.get("tau"))
    _check_initial(errors, data.get("initial"))
    _check_solvers(errors, data.get("solver"), data.get("cf_recursion"))
    times = data.get("times")
    if not isinstance(times, list) or not times:
        errors.append("times: expected a non-empty list")
        times = []
    elif not all(isinstance(t, (int, float)) and not isinstance(t, bool) and t >= 0 for t in times):
        errors.append("times: entries must be non-negative numbers")
    elif any(b < a for a, b in zip(times, times[1:])):
        errors.append("times must be non-decreasing")
    diags = _check_diagnostics(errors, data.get("diagnostics"))
    known = {"schema_version", "name", "seed", "tau", "coupling", "initial", "solver",
             "cf_recursion", "times", "diagnostics", "output", "description"}
    for key in data:
        if key not in known:
            errors.append(f"{key}: unknown key")
    if errors:
        raise ConfigValidationError(errors)
    return ScenarioConfig(
        name=str(data.get("name", "scenario")),
        seed=int(seed),
        tau=data["tau"],
        coupling=coupling,
        initial=data["initial"],
        solver=data.get("solver"),
        cf_recursion=data.get("cf_recursion"),
        times=tuple(float(t) for t in times),
        diagnostics=diags,
        output=str(data.get("output", "out")),
        raw=copy.deepcopy(data),
    )


# ---------------------------------------------------------------------------
# building model objects
# ---------------------------------------------------------------------------


def build_tau(entry: dict) -> TauDistribution:
    kind = entry["kind"]
    if kind == "degenerate":
        tau: TauDistribution = Degenerate(float(entry["l"]), float(entry["r"]))
    elif kind == "mixture":
        tau = DiscreteMixture([((float(a["l"]), float(a["r"])), float(a["weight"]))
                               for a in entry["atoms"]])
    elif kind == "product_beta":
        tau = ProductBeta(float(entry["a_l"]), float(entry["b_l"]), float(entry["a_r"]),
                          float(entry["b_r"]))
    else:
        tau = EmpiricalTau(entry["pairs"])
    return shift_tau(tau, float(entry.get("scale_l", 1.0)), float(entry.get("scale_r", 1.0)))


def initial_alpha(entry: dict, p_star: float) -> Optional[float]:
    """Tail exponent of the initial law, or ``None`` for light-tailed laws."""
    if entry["kind"] not in ("pareto", "weak_pareto", "stable"):
        return None
    a = entry["alpha"]
    return float(p_star) if a == "p_star" else float(a)


def build_initial(entry: dict, p_star: float):
    kind = entry["kind"]
    alpha = initial_alpha(entry, p_star)
    if kind == "pareto":
        return WeakParetoLaw.two_sided(alpha, float(entry.get("x0", 1.0)),
                                       float(entry.get("right_share", 0.5)),
                                       bool(entry.get("mean_centering", False)))
    if kind == "weak_pareto":
        core = entry.get("core")
        if core is not None:
            core = (AtomCore(float(core.get("location", 0.0))) if core["kind"] == "atom"
                    else UniformCore(float(core["a"]), float(core["b"])))
        return WeakParetoLaw(alpha, float(entry["c1"]), float(entry["c2"]),
                             float(entry.get("x0", 1.0)), core,
                             bool(entry.get("mean_centering", False)))
    if kind == "stable":
        k, g = k_gamma_from_tails(float(entry["c1"]), float(entry["c2"]), alpha)
        return StableParams(alpha, float(entry.get("chi", 0.0)), k, g)
    if kind == "gaussian":
        return GaussianLaw(float(entry["sigma"]), float(entry.get("mean", 0.0)))
    return PointMass(float(entry.get("location", 0.0)))
