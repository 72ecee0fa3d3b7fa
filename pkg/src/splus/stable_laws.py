"""Stable characteristic functions, a Chambers-Mallows-Stuck sampler and scale mixtures.

The characteristic function is written as::

    g(xi) = exp{ i chi xi - k |xi|^alpha (1 - i gamma sign(xi) w(xi, alpha)) }

with ``w = tan(pi alpha / 2)`` for ``alpha != 1`` and ``w = (2/pi) log|xi|`` for
``alpha == 1``.  For ``alpha > 2`` the law degenerates to the point mass at
``chi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gamma as gamma_fn

__all__ = [
    "StableParams",
    "MixingMeasure",
    "BothTailsZero",
    "stable_cf",
    "stable_sample",
    "k_gamma_from_tails",
    "mixture_cf",
]


class BothTailsZero(ValueError):
    pass


@dataclass(frozen=True)
class StableParams:
    alpha: float
    chi: float = 0.0
    k_alpha: float = 1.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.k_alpha < 0:
            raise ValueError("k_alpha must be non-negative")
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [-1, 1]")
        if self.alpha == 2 and self.gamma != 0:
            raise ValueError("gamma must be 0 when alpha = 2")


@dataclass(frozen=True)
class MixingMeasure:
    """Monte Carlo draws approximating the mixing law of the stable scale."""

    samples: NDArray[np.float64]
    generation_depth: int = 0

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("empty mixing measure")
        if np.any(s < 0):
            raise ValueError("mixing samples must be non-negative")
        object.__setattr__(self, "samples", s)


def stable_cf(xi: ArrayLike, p: StableParams):
    xi = np.asarray(xi, dtype=float)
    if p.alpha > 2:
        out = np.exp(1j * p.chi * xi)
        return out if out.ndim else complex(out)
    a = np.abs(xi)
    sgn = np.sign(xi)
    if p.alpha == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(a > 0, (2.0 / np.pi) * np.log(np.where(a > 0, a, 1.0)), 0.0)
    else:
        w = np.tan(np.pi * p.alpha / 2.0)
    expo = 1j * p.chi * xi - p.k_alpha * a**p.alpha * (1.0 - 1j * p.gamma * sgn * w)
    out = np.exp(expo)
    return out if out.ndim else complex(out)


def _cms(alpha: float, beta: float, size, rng: np.random.Generator) -> NDArray:
    # standard S(alpha, beta, 1, 0) variates in the Samorodnitsky-Taqqu form
    V = rng.uniform(-np.pi / 2, np.pi / 2, size)
    W = rng.standard_exponential(size)
    if alpha == 1:
        h = np.pi / 2 + beta * V
        return (2 / np.pi) * (h * np.tan(V) - beta * np.log((np.pi / 2) * W * np.cos(V) / h))
    t = beta * math.tan(np.pi * alpha / 2)
    B = math.atan(t) / alpha
    S = (1 + t * t) ** (1 / (2 * alpha))
    return (S * np.sin(alpha * (V + B)) / np.cos(V) ** (1 / alpha)
            * (np.cos(V - alpha * (V + B)) / W) ** ((1 - alpha) / alpha))


def stable_sample(p: StableParams, rng: np.random.Generator, size=None):
    """Draws whose characteristic function is ``stable_cf(., p)``.

    The sampler works in the (scale, skew) form ``sigma = k^(1/alpha)``.  For
    ``alpha != 1`` the skew equals ``gamma``; for ``alpha == 1`` the logarithmic
    term above carries the opposite sign to the usual convention, so the skew
    is ``-gamma``.
    """
    if p.alpha > 2:
        return p.chi if size is None else np.full(size, float(p.chi))
    n = 1 if size is None else size
    if p.k_alpha == 0:
        out = np.full(n, float(p.chi))
    else:
        sigma = p.k_alpha ** (1.0 / p.alpha)
        if p.alpha == 1:
            beta = -p.gamma
            x = _cms(1.0, beta, n, rng)
            out = sigma * x + (2 / np.pi) * beta * sigma * math.log(sigma) + p.chi
        else:
            out = sigma * _cms(p.alpha, p.gamma, n, rng) + p.chi
    return float(out[0]) if size is None else out


def k_gamma_from_tails(c1: float, c2: float, alpha: float) -> tuple[float, float]:
    """Scale and skewness of the stable law whose tails are ``c1 x^-alpha``, ``c2 x^-alpha``."""
    if c1 < 0 or c2 < 0:
        raise ValueError("tail constants must be non-negative")
    if c1 + c2 <= 0:
        raise BothTailsZero("c1 + c2 must be positive")
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    k = (c1 + c2) * np.pi / (2.0 * gamma_fn(alpha) * np.sin(np.pi * alpha / 2.0))
    return float(k), float((c2 - c1) / (c1 + c2))


def mixture_cf(xi: ArrayLike, p: StableParams, nu: MixingMeasure):
    """``E[g(xi * M^(1/alpha))]`` averaged over the mixing draws ``M``."""
    xi = np.asarray(xi, dtype=float)
    scale = nu.samples ** (1.0 / p.alpha)
    vals = stable_cf(np.multiply.outer(xi, scale), p)
    out = np.mean(vals, axis=-1)
    return out if np.ndim(out) else complex(out)
