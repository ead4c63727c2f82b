import numpy as np
import pytest
from scipy import stats

from src.core.errors import DimensionError, DomainError
from src.core.loader import load_matrix
from src.core.quaternion import (
    Quaternion,
    nu_embed,
    nu_stack,
    q_map,
    quaternion_shadow_density,
    quaternion_spectrum,
    quaternionize,
    random_symplectic,
)
from src.core.shadow import build_model
from src.core.states import EnsembleSpec, collect_shadow, ks_distance


def test_units_multiply_like_quaternions():
    i, j, k = Quaternion(0, 1), Quaternion(0, 0, 1), Quaternion(0, 0, 0, 1)
    assert i * j == k
    assert j * i == Quaternion(0, 0, 0, -1)
    assert i * i == Quaternion(-1)
    assert Quaternion(1, 2, 2, 4).norm() == pytest.approx(5.0)


def test_nu_is_multiplicative():
    p, q = Quaternion(0.3, -1.0, 2.0, 0.5), Quaternion(-0.7, 0.2, 0.1, 1.5)
    assert np.allclose(nu_embed(p * q), nu_embed(p) @ nu_embed(q))


def test_nu_stack_blocks():
    rows = np.array([[[1.0, 2.0, 3.0, 4.0], [0.5, 0.0, -1.0, 0.0]]] * 3)
    stacked = nu_stack(rows)
    assert stacked.shape == (3, 4, 2)
    assert np.array_equal(stacked[1, 2:], nu_embed(Quaternion(0.5, 0.0, -1.0, 0.0)))


def test_q_map_fixes_quaternionic_blocks():
    block = nu_embed(Quaternion(0.2, -0.4, 1.0, 3.0))
    assert np.allclose(q_map(block), block)
    assert np.allclose(q_map(np.diag([1.0, -1.0])), 0.0)
    with pytest.raises(DimensionError):
        q_map(np.eye(3))


def test_tridiagonal_fixture():
    a = load_matrix("fixture:tridiag4")
    qa = quaternionize(a)
    expected = np.zeros((4, 4))
    expected[0, 3] = expected[3, 0] = -0.5
    expected[1, 2] = expected[2, 1] = 0.5
    assert np.allclose(qa, expected)
    assert np.allclose(quaternion_spectrum(a), [-0.5, 0.5], atol=1e-14)
    # Beta(2, 2) on [-1/2, 1/2]
    assert quaternion_shadow_density(a, 0.0) == pytest.approx(1.5, rel=1e-12)
    assert quaternion_shadow_density(a, 0.25) == pytest.approx(6 * 0.75 * 0.25, rel=1e-12)


def test_tridiagonal_sampling_matches_beta():
    a = load_matrix("fixture:tridiag4")
    sample = collect_shadow(a, EnsembleSpec.parse("quaternion", 4), 100_000, seed=17)
    assert ks_distance(sample, stats.beta(2, 2, loc=-0.5, scale=1.0).cdf) < 0.01


def test_three_level_chain_matches_spline_model():
    a = np.diag([0.0, 0.0, 1.0, 1.0, 2.0, 2.0])
    model = build_model(a, "quaternion")
    assert model.components[0].dist.a == (0.0, 1.0, 2.0)
    assert model.components[0].dist.k == (2.0, 2.0, 2.0)
    sample = collect_shadow(a, EnsembleSpec.parse("quaternion", 6), 50_000, seed=3)
    assert ks_distance(sample, model.cdf) < 0.015


def test_three_level_chain_across_ensembles():
    # real on D x I4, complex on D x I2 and quaternion on D share the law D((0, 1, 2); (2, 2, 2))
    d = np.diag([0.0, 1.0, 2.0])
    real = collect_shadow(np.kron(d, np.eye(4)), EnsembleSpec.parse("real", 12), 50_000, seed=5)
    cplx = collect_shadow(np.kron(d, np.eye(2)), EnsembleSpec.parse("complex", 6), 50_000, seed=6)
    quat = collect_shadow(
        np.kron(d, np.eye(2)), EnsembleSpec.parse("quaternion", 6), 50_000, seed=7
    )
    for x, y in ((real, cplx), (cplx, quat), (real, quat)):
        assert stats.ks_2samp(x.values, y.values).statistic < 0.015


def test_symplectic_conjugation_keeps_quaternion_spectrum():
    s = random_symplectic(2, seed=4)
    assert np.allclose(s.conj().T @ s, np.eye(4), atol=1e-12)
    qa = quaternionize(load_matrix("fixture:tridiag4"))
    rotated = s @ qa @ s.conj().T
    rotated = 0.5 * (rotated + rotated.conj().T)
    assert np.allclose(quaternionize(rotated), rotated, atol=1e-12)
    assert np.allclose(quaternion_spectrum(rotated), quaternion_spectrum(qa), atol=1e-10)


def test_quaternionize_rejects():
    with pytest.raises(DimensionError):
        quaternionize(np.eye(3))
    with pytest.raises(DomainError):
        quaternionize(np.array([[0.0, 1.0], [0.0, 0.0]]))
