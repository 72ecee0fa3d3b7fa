from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import gamma as gamma_fn

from splus.inequality import EmpiricalDistribution, tail_fit
from splus.stable_laws import (
    BothTailsZero,
    MixingMeasure,
    StableParams,
    k_gamma_from_tails,
    mixture_cf,
    stable_cf,
    stable_sample,
)

XI = np.linspace(0.1, 3.0, 30)


def empirical_cf(x, xi):
    return np.array([np.mean(np.exp(1j * s * x)) for s in xi])


def test_params_validation():
    with pytest.raises(ValueError):
        StableParams(0.0)
    with pytest.raises(ValueError):
        StableParams(1.5, k_alpha=-1)
    with pytest.raises(ValueError):
        StableParams(1.5, gamma=1.5)
    with pytest.raises(ValueError):
        StableParams(2.0, gamma=0.3)


def test_cf_examples():
    assert stable_cf(0.0, StableParams(1.3, 0.4, 2.0, 0.5)) == 1
    assert stable_cf(0.0, StableParams(1.0, 0.0, 1.0, -0.7)) == 1
    sigma0 = 1.7
    xi = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(stable_cf(xi, StableParams(2.0, 0.0, sigma0**2 / 2)),
                               np.exp(-sigma0**2 * xi**2 / 2), rtol=1e-14)
    np.testing.assert_allclose(stable_cf(xi, StableParams(3.0, 1.5, 0.8)), np.exp(1.5j * xi))


params = st.builds(
    StableParams,
    st.floats(0.2, 2.0).filter(lambda a: a != 2.0),
    st.floats(-3, 3),
    st.floats(0, 3),
    st.floats(-1, 1),
)


@settings(max_examples=100, deadline=None)
@given(params, st.floats(-20, 20))
def test_cf_bounded_and_hermitian(p, xi):
    v = stable_cf(xi, p)
    assert abs(v) <= 1 + 1e-12
    assert stable_cf(-xi, p) == pytest.approx(np.conj(v), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.05, 0.95), st.floats(0.1, 3), st.floats(-10, 10))
def test_stability_identity(alpha, share, k, xi):
    l = share ** (1 / alpha)
    r = (1 - share) ** (1 / alpha)
    p = StableParams(alpha, 0.0, k, 0.0)
    assert stable_cf(l * xi, p) * stable_cf(r * xi, p) == pytest.approx(stable_cf(xi, p), abs=1e-12)


def test_gaussian_variance():
    x = stable_sample(StableParams(2.0, 0.0, 0.5), np.random.default_rng(0), size=100_000)
    assert abs(x.var() - 1.0) < 0.03


def test_cauchy_median():
    x = stable_sample(StableParams(1.0, 3.0, 1.0, 0.0), np.random.default_rng(1), size=100_000)
    assert abs(np.median(x) - 3.0) < 0.03


def test_symmetric_sampler_matches_scipy():
    # scipy's S1 parameterisation with scale k^(1/alpha) is an independent oracle
    p = StableParams(1.5, 0.3, 0.8, 0.0)
    x = stable_sample(p, np.random.default_rng(2), size=5_000)
    ref = stats.levy_stable(1.5, 0.0, loc=0.3, scale=0.8 ** (1 / 1.5))
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


@pytest.mark.parametrize("p", [
    StableParams(1.5, 0.0, 1.0, 0.0),
    StableParams(1.5, 0.5, 0.7, 0.6),
    StableParams(0.7, -0.2, 0.5, -0.8),
    StableParams(1.0, 0.0, 1.0, 0.0),
    StableParams(1.0, 1.0, 0.6, 0.7),
    StableParams(1.0, 0.0, 2.0, -0.5),
    StableParams(2.0, 0.0, 0.3, 0.0),
])
def test_sampler_cf_matches_formula(p):
    x = stable_sample(p, np.random.default_rng(3), size=100_000)
    err = np.abs(empirical_cf(x, XI) - stable_cf(XI, p)).max()
    assert err < 0.02


def test_degenerate_cases():
    rng = np.random.default_rng(4)
    assert stable_sample(StableParams(3.0, 1.5), rng) == 1.5
    assert np.all(stable_sample(StableParams(2.5, -1.0), rng, size=4) == -1.0)
    assert np.all(stable_sample(StableParams(1.2, 0.7, 0.0), rng, size=4) == 0.7)
    assert isinstance(stable_sample(StableParams(1.5), rng), float)


def test_tail_fit_on_stable_draws():
    x = stable_sample(StableParams(1.5, 0.0, 1.0, 0.0), np.random.default_rng(5), size=1_000_000)
    fit = tail_fit(EmpiricalDistribution(x), 1000)
    assert abs(fit.alpha - 1.5) < 3 * fit.stderr


def test_k_gamma_examples():
    k, g = k_gamma_from_tails(0.5, 0.5, 1.5)
    assert g == 0.0
    assert k == pytest.approx(np.pi / (2 * gamma_fn(1.5) * np.sin(3 * np.pi / 4)))
    assert k == pytest.approx(2.5066, abs=1e-4)
    assert k_gamma_from_tails(0.0, 2.0, 0.8)[1] == 1.0
    assert k_gamma_from_tails(1.0, 0.0, 1.2)[1] == -1.0
    with pytest.raises(BothTailsZero):
        k_gamma_from_tails(0.0, 0.0, 1.5)


@pytest.mark.parametrize("alpha,c1,c2", [(1.5, 0.2, 0.6), (0.8, 0.5, 0.1)])
def test_tail_constants_round_trip(alpha, c1, c2):
    # x^alpha P(X > x) -> c2 and x^alpha P(X < -x) -> c1 for the mapped stable law
    k, g = k_gamma_from_tails(c1, c2, alpha)
    ref = stats.levy_stable(alpha, g, scale=k ** (1 / alpha))
    x = 200.0
    assert x**alpha * ref.sf(x) == pytest.approx(c2, rel=0.05)
    assert x**alpha * ref.cdf(-x) == pytest.approx(c1, rel=0.05)


def test_mixing_measure_validation():
    with pytest.raises(ValueError):
        MixingMeasure(np.array([]))
    with pytest.raises(ValueError):
        MixingMeasure(np.array([1.0, -0.1]))


def test_mixture_cf_examples():
    p = StableParams(1.4, 0.0, 0.9, 0.3)
    xi = np.linspace(-3, 3, 25)
    np.testing.assert_allclose(mixture_cf(xi, p, MixingMeasure(np.array([1.0]))), stable_cf(xi, p))
    np.testing.assert_allclose(mixture_cf(xi, p, MixingMeasure(np.array([0.0]))), 1.0)
    m1, m2 = 0.4, 2.5
    want = 0.5 * (stable_cf(xi * m1 ** (1 / 1.4), p) + stable_cf(xi * m2 ** (1 / 1.4), p))
    np.testing.assert_allclose(mixture_cf(xi, p, MixingMeasure(np.array([m1, m2]))), want)
    assert np.all(np.abs(mixture_cf(xi, p, MixingMeasure(np.array([m1, m2])))) <= 1 + 1e-12)
