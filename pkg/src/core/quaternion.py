from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from src.core.dirichlet import PushforwardDist
from src.core.errors import DimensionError, DomainError
from src.core.linalg import as_matrix, eigenvalues_hermitian
from src.core.realshadow import pushforward_density
from src.utils.log import get_logger

logger = get_logger("quaternion")

PAIR_RTOL = 1e-8


@dataclass(frozen=True)
class Quaternion:
    a0: float
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        p, q = self, other
        return Quaternion(
            p.a0 * q.a0 - p.a1 * q.a1 - p.a2 * q.a2 - p.a3 * q.a3,
            p.a0 * q.a1 + p.a1 * q.a0 + p.a2 * q.a3 - p.a3 * q.a2,
            p.a0 * q.a2 - p.a1 * q.a3 + p.a2 * q.a0 + p.a3 * q.a1,
            p.a0 * q.a3 + p.a1 * q.a2 - p.a2 * q.a1 + p.a3 * q.a0,
        )

    def norm(self) -> float:
        return math.sqrt(self.a0**2 + self.a1**2 + self.a2**2 + self.a3**2)


def nu_embed(q: Quaternion) -> np.ndarray:
    return np.array(
        [
            [q.a0 + 1j * q.a1, q.a2 + 1j * q.a3],
            [-q.a2 + 1j * q.a3, q.a0 - 1j * q.a1],
        ]
    )


def nu_stack(xi) -> np.ndarray:
    """
    Rows of (a0, a1, a2, a3) -> stacked 2x2 nu-images, shape (2N, 2).
    A leading batch axis is kept: (..., N, 4) -> (..., 2N, 2).
    """
    xi = np.asarray(xi, dtype=float)
    a0, a1, a2, a3 = (xi[..., c] for c in range(4))
    top = np.stack([a0 + 1j * a1, a2 + 1j * a3], axis=-1)
    bottom = np.stack([-a2 + 1j * a3, a0 - 1j * a1], axis=-1)
    blocks = np.stack([top, bottom], axis=-2)
    return blocks.reshape(xi.shape[:-2] + (2 * xi.shape[-2], 2))


def q_map(block) -> np.ndarray:
    b = np.asarray(block, dtype=complex)
    if b.shape != (2, 2):
        raise DimensionError(f"q_map expects a 2x2 block, got {b.shape}")
    c = b.conj()
    return 0.5 * np.array(
        [
            [b[0, 0] + c[1, 1], b[0, 1] - c[1, 0]],
            [b[1, 0] - c[0, 1], c[0, 0] + b[1, 1]],
        ]
    )


def _blockwise_q(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if a.ndim != 2 or n != a.shape[1] or n % 2:
        raise DimensionError(f"Expected an even square matrix, got shape {a.shape}")
    out = np.empty_like(a, dtype=complex)
    for i in range(0, n, 2):
        for j in range(0, n, 2):
            out[i : i + 2, j : j + 2] = q_map(a[i : i + 2, j : j + 2])
    return out


def quaternionize(matrix) -> np.ndarray:
    a = as_matrix(matrix)
    if a.n % 2:
        raise DimensionError("Quaternion shadow needs an even dimension")
    if not a.hermitian:
        raise DomainError("quaternionize expects a Hermitian matrix")
    return _blockwise_q(np.asarray(a.entries))


def quaternion_spectrum(matrix, rtol: float = PAIR_RTOL) -> np.ndarray:
    """
    The N quaternionic eigenvalues: spectrum of q(A) with duplicate pairs halved.
    """
    values = eigenvalues_hermitian(quaternionize(matrix))
    first, second = values[0::2], values[1::2]
    span = max(values[-1] - values[0], 1.0)
    worst = float(np.max(np.abs(first - second)))
    if worst > rtol * span:
        logger.warning(f"Eigenvalues of q(A) are not paired to {rtol:g}: worst gap {worst:.3g}")
    return 0.5 * (first + second)


def quaternion_shadow_density(matrix, x: float) -> float:
    values = quaternion_spectrum(matrix)
    return pushforward_density(PushforwardDist.of(values, 2.0))(x)


def random_symplectic(n: int, seed=None) -> np.ndarray:
    """
    Unitary 2n x 2n matrix with quaternionic 2x2 blocks (a compact symplectic element).
    """
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((2 * n, 2 * n)) + 1j * rng.standard_normal((2 * n, 2 * n))
    generator = _blockwise_q(y - y.conj().T)
    return sla.expm(generator)
