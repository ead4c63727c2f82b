import logging
import math

import numpy as np
import pytest
from scipy import integrate

from src.core.curve import integrate_density
from src.core.dirichlet import PushforwardDist, mean_variance, mgf_eval
from src.core.errors import DomainError, PointMassError
from src.core.spline import (
    complex_shadow_density,
    mixed_shadow_density,
    partial_fractions,
    spline_density,
)


def test_closed_and_series_coefficients_agree():
    closed = partial_fractions((1.0, 2.0, 4.0), 2, method="closed")
    series = partial_fractions((1.0, 2.0, 4.0), 2, method="series")
    for row_c, row_s in zip(closed.beta, series.beta):
        assert row_c == pytest.approx(row_s, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("k", [(1, 1, 1), (2, 1, 3), (2, 2, 2)])
def test_partial_fractions_reproduce_product(k):
    a = (0.5, 1.5, 2.5)
    table = partial_fractions(a, k)
    assert table.total() == pytest.approx(1.0, abs=1e-12)
    for r in (-1.0, 0.1, 0.3):
        assert table.evaluate(r) == pytest.approx(mgf_eval(PushforwardDist.of(a, k), r), rel=1e-11)


def test_partial_fractions_rejects():
    with pytest.raises(DomainError):
        partial_fractions((0.0, 1.0), 1)
    with pytest.raises(DomainError):
        partial_fractions((1.0, 1.0, 2.0), 1)
    with pytest.raises(DomainError):
        partial_fractions((1.0, 2.0), (1.5, 1))
    with pytest.raises(DomainError):
        partial_fractions((1.0, 2.0), (1, 2), method="closed")
    with pytest.raises(DomainError):
        partial_fractions((1.0, 2.0), 1, method="taylor")


def test_classical_hat_function():
    a = (0.0, 1.0, 2.0)
    assert spline_density(a, 1, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert spline_density(a, 1, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert spline_density(a, 1, 1.5) == pytest.approx(0.5, abs=1e-12)
    assert spline_density(a, 1, 2.5) == 0.0
    assert spline_density(a, 1, -0.1) == 0.0


def test_two_knots_uniform_and_beta():
    assert spline_density((1.0, 3.0), 1, 2.2) == pytest.approx(0.5, abs=1e-13)
    assert mixed_shadow_density(np.diag([1.0, 3.0]), 2, 2.0) == pytest.approx(0.75, abs=1e-12)


def test_translation_invariance():
    a = (-2.0, -0.5, 1.0)
    shifted = tuple(v + 5.0 for v in a)
    for x in (-1.7, -0.5, 0.2, 0.9):
        assert spline_density(a, (1, 2, 1), x) == pytest.approx(
            spline_density(shifted, (1, 2, 1), x + 5.0), rel=1e-10, abs=1e-12
        )


def test_normalization_on_trapezoid_grid():
    a, k = (0.5, 1.3, 2.0, 3.1), (1, 2, 1, 1)
    eps = 0.05
    xs = np.linspace(a[0] - eps, a[-1] + eps, 10_000)
    ys = np.array([spline_density(a, k, x) for x in xs])
    assert integrate.trapezoid(ys, xs) == pytest.approx(1.0, abs=1e-6)


def test_mean_and_variance_by_quadrature():
    a, k = (0.5, 1.3, 2.0, 3.1), (1, 2, 1, 3)
    f = lambda x: spline_density(a, k, x)  # noqa: E731
    mean, var = mean_variance(PushforwardDist.of(a, k))
    m = integrate_density(f, a, lambda x: x)
    assert m == pytest.approx(mean, abs=1e-9)
    assert integrate_density(f, a, lambda x: (x - mean) ** 2) == pytest.approx(var, rel=1e-8)


@pytest.mark.parametrize(
    "a,k",
    [
        ((0.5, 1.0, 1.8, 2.5), (1, 3, 2, 1)),
        ((0.2, 0.9, 1.4, 2.0, 2.6), (1, 1, 1, 1, 1)),
        ((-1.0, 0.5, 2.0), (3, 1, 2)),
    ],
)
def test_generating_function_identity(a, k):
    dist = PushforwardDist.of(a, k)
    kt = dist.params.k_tilde
    f = lambda x: spline_density(a, k, x)  # noqa: E731
    top = max(abs(v) for v in a)
    for r in np.linspace(-0.8 / top, 0.8 / top, 10):
        lhs = integrate_density(f, a, lambda x: (1.0 - r * x) ** (-kt))
        assert lhs == pytest.approx(mgf_eval(dist, r), rel=1e-6)


def test_complex_shadow_of_diagonal():
    assert complex_shadow_density(np.diag([0.0, 1.0, 2.0]), 1.0) == pytest.approx(1.0, abs=1e-12)
    # repeated eigenvalue merges into weight 2
    assert complex_shadow_density(np.diag([1.0, 1.0, 3.0]), 2.0) == pytest.approx(0.5, abs=1e-12)


def test_unitary_invariance():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    d = np.diag([0.3, 1.1, 2.4])
    a = q @ d @ q.conj().T
    for x in (0.7, 1.5, 2.0):
        assert complex_shadow_density(a, x) == pytest.approx(
            complex_shadow_density(d, x), rel=1e-9
        )


def test_point_mass():
    with pytest.raises(PointMassError) as e:
        complex_shadow_density(np.eye(3) * 2.0, 2.0)
    assert e.value.location == 2.0
    with pytest.raises(DomainError):
        mixed_shadow_density(np.diag([1.0, 2.0]), 0, 1.5)


def test_nearly_equal_knots_are_collapsed(caplog):
    with caplog.at_level(logging.WARNING):
        value = spline_density((1.0, 1.0 + 1e-9, 3.0), (1, 1, 1), 2.0)
    assert value == pytest.approx(0.5, abs=1e-6)
    assert any("collapsing" in r.message for r in caplog.records)
    assert not math.isnan(value)
