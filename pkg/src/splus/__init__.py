"""Kinetic s-plus exchange model: simulation, tails, stable limits and concentration."""

from .market_model import (
    CouplingRule,
    Degenerate,
    DiscreteMixture,
    EmpiricalTau,
    InadmissibleTau,
    ProductBeta,
    check_admissible,
    s_function,
    shift_tau,
    smallest_root,
)
from .inequality import EmpiricalDistribution, WeakParetoLaw, gini, lorenz, truncated_lorenz, tail_fit
from .stable_laws import StableParams, stable_cf, stable_sample
from .kinetics import GaussianLaw, PointMass, cf_recursion, simulate_agents, wild_samples
from .diagnostics import classify_regime, escape_mass, ks_two_sample, steady_state_residual

__version__ = "0.1.0"
