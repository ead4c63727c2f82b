import math

import numpy as np
import pytest
from scipy import integrate

from src.core.dirichlet import (
    DirichletParams,
    PushforwardDist,
    Spectrum,
    collapse_knots,
    compositions,
    density_n2,
    dirichlet_moment,
    mean_variance,
    mgf_eval,
    pochhammer,
    pushforward_moment,
    sample_simplex,
    series_coefficients,
    survival_series,
)
from src.core.errors import ConvergenceError, DimensionError, DomainError
from src.core.realshadow import real_density
from src.core.spline import spline_density


def test_spectrum_validation():
    assert Spectrum.from_values([3, 1, 2]).a == (1.0, 2.0, 3.0)
    assert Spectrum((1, 4)).span == 3.0
    with pytest.raises(DomainError):
        Spectrum((2.0, 1.0))
    with pytest.raises(DomainError):
        Spectrum(())
    with pytest.raises(DomainError):
        Spectrum((0.0, math.inf))


def test_params_and_pairing():
    with pytest.raises(DomainError):
        DirichletParams((1.0, 0.0))
    assert DirichletParams((0.5, 1.5, 2)).k_tilde == 4.0
    dist = PushforwardDist.of([3.0, 1.0], [2.0, 0.5])
    assert dist.a == (1.0, 3.0)
    assert dist.k == (0.5, 2.0)
    with pytest.raises(DimensionError):
        PushforwardDist(Spectrum((1.0, 2.0)), DirichletParams((1.0,)))


def test_pochhammer_and_moments():
    assert pochhammer(0.5, 0) == 1.0
    assert pochhammer(0.5, 3) == 0.5 * 1.5 * 2.5
    params = DirichletParams((1.0, 2.0))
    # E[T_1] = k_1 / k_tilde
    assert dirichlet_moment(params, (1, 0)) == pytest.approx(1 / 3)
    assert dirichlet_moment(params, (1, 1)) == pytest.approx(2 / 12)
    with pytest.raises(DimensionError):
        dirichlet_moment(params, (1,))


def test_compositions():
    assert list(compositions(3, 2)) == [(3, 0), (2, 1), (1, 2), (0, 3)]
    assert sum(1 for _ in compositions(4, 3)) == math.comb(6, 2)


def test_mean_variance_closed_form_for_real_ensemble():
    a = [1.0, 2.0, 4.0, 7.0]
    mean, var = mean_variance(PushforwardDist.of(a, 0.5))
    mu = sum(a) / 4
    assert mean == pytest.approx(mu, abs=1e-14)
    assert var == pytest.approx(2.0 / (4 * 6) * sum((v - mu) ** 2 for v in a), rel=1e-14)


def test_moments_agree_with_mean_variance():
    dist = PushforwardDist.of([0.0, 1.0, 3.0], [0.5, 1.0, 2.0])
    mean, var = mean_variance(dist)
    assert pushforward_moment(dist, 1) == pytest.approx(mean, rel=1e-13)
    assert pushforward_moment(dist, 2) - mean**2 == pytest.approx(var, rel=1e-12)


def test_moment_series_reproduces_generating_function():
    dist = PushforwardDist.of([0.2, 0.5, 0.9], [1.0, 2.0, 0.5])
    kt = dist.params.k_tilde
    r = 0.3
    series = sum(
        pochhammer(kt, n) / math.factorial(n) * r**n * pushforward_moment(dist, n)
        for n in range(41)
    )
    assert series == pytest.approx(mgf_eval(dist, r), rel=1e-10)


def test_mgf_domain():
    dist = PushforwardDist.of([1.0, 2.0], 1.0)
    assert mgf_eval(dist, 0.0) == 1.0
    with pytest.raises(DomainError):
        mgf_eval(dist, 0.5)


def test_series_coefficients():
    # (1 - t/2)^(-2) = sum (m + 1) 2^-m t^m
    assert series_coefficients([0.5], [2.0], 3) == pytest.approx([1.0, 1.0, 0.75, 0.5])
    two = series_coefficients([0.5, -0.25], [1.0, 1.0], 4)
    direct = np.polynomial.polynomial.polymul(
        [0.5**m for m in range(5)], [(-0.25) ** m for m in range(5)]
    )[:5]
    assert two == pytest.approx(list(direct))


def test_density_n2_arcsine():
    dist = PushforwardDist.of([1.0, 3.0], 0.5)
    assert density_n2(dist, 2.0) == pytest.approx(1 / math.pi, abs=1e-15)
    assert density_n2(dist, 1.0) == math.inf
    assert density_n2(dist, 3.0) == math.inf
    with pytest.raises(DomainError):
        density_n2(dist, 3.5)


def test_density_n2_is_beta():
    dist = PushforwardDist.of([0.0, 2.0], [2.0, 3.0])
    # X = 2 T_2, T_2 ~ Beta(3, 2)
    x = 0.7
    expected = 0.5 * 12 * (x / 2) ** 2 * (1 - x / 2)
    assert density_n2(dist, x) == pytest.approx(expected, rel=1e-13)
    total, _ = integrate.quad(lambda t: density_n2(dist, t), 0.0, 2.0)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_survival_series_matches_integrated_spline():
    a, k = (0.0, 1.0, 3.0), (2, 1, 3)
    x = 1.0 + 0.3 * 2.0
    tail, _ = integrate.quad(lambda t: spline_density(a, k, t), x, 3.0)
    assert survival_series(PushforwardDist.of(a, k), x) == pytest.approx(tail, rel=1e-9)


def test_survival_series_matches_integrated_real_density():
    a = (0.0, 0.7, 1.6, 3.0)
    x = 1.6 + 0.3 * 1.4
    tail, _ = integrate.quad(lambda t: real_density(a, t), x, 3.0, limit=200)
    assert survival_series(PushforwardDist.of(a, 0.5), x) == pytest.approx(tail, rel=1e-7)


def test_survival_series_domain_and_cap():
    dist = PushforwardDist.of([0.0, 1.0, 3.0], 0.5)
    assert survival_series(dist, 3.0) == 0.0
    with pytest.raises(DomainError):
        survival_series(dist, 0.5)
    with pytest.raises(ConvergenceError):
        survival_series(dist, 1.0 + 1e-9, degree_cap=5)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_top_knot_exponent(seed):
    rng = np.random.default_rng(seed)
    a = np.cumsum(rng.uniform(0.5, 1.5, 4))
    k = rng.uniform(0.5, 2.0, 4)
    dist = PushforwardDist.of(a, k)
    top, below = dist.a[-1], dist.a[-2]
    g1, g2 = 1e-3 * (top - below), 1e-4 * (top - below)
    s1, s2 = survival_series(dist, top - g1), survival_series(dist, top - g2)
    slope = math.log(s1 / s2) / math.log(g1 / g2)
    assert slope == pytest.approx(dist.params.k_tilde - dist.k[-1], abs=0.05)


def test_collapse_knots_merges_runs():
    dist = collapse_knots(PushforwardDist.of([1.0, 1.0, 3.0], [1.0, 1.0, 1.0]))
    assert dist.a == (1.0, 3.0)
    assert dist.k == (2.0, 1.0)
    distinct = PushforwardDist.of([1.0, 2.0], 1.0)
    assert collapse_knots(distinct) is distinct


def test_sample_simplex():
    params = DirichletParams((0.5, 1.0, 2.5))
    t = sample_simplex(params, seed=7, size=50_000)
    assert t.shape == (50_000, 3)
    assert np.all(t >= 0)
    assert np.allclose(t.sum(axis=1), 1.0)
    assert np.array_equal(t, sample_simplex(params, seed=7, size=50_000))
    se = np.sqrt(0.25 / 50_000)
    assert np.all(np.abs(t.mean(axis=0) - np.array(params.k) / 4.0) < 5 * se)
    one = sample_simplex(params, seed=1)
    assert one.shape == (3,)
