from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import DimensionError, DomainError

_R = 0.7071067811865476  # 1/sqrt(2)

SIGMA_Y = np.array([[0, -1j], [1j, 0]])

# real maximally entangled states: vec(O)/sqrt(2) = Z r, det O = +1 (Z1) or -1 (Z2)
Z1 = _R * np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])
Z2 = _R * np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [-1.0, 0.0]])

# magic basis: W r is maximally entangled for every real unit r
W = _R * np.array(
    [
        [0, 0, 1, 1j],
        [-1, 1j, 0, 0],
        [1, 1j, 0, 0],
        [0, 0, 1, -1j],
    ]
)


@dataclass(frozen=True, eq=False)
class IsometryPair:
    z1: np.ndarray
    z2: np.ndarray
    w: np.ndarray

    def defects(self) -> dict[str, float]:
        """
        Max-norm deviation of Z^T Z and W^dagger W from the identity.
        """
        return {
            "z1": float(np.max(np.abs(self.z1.T @ self.z1 - np.eye(2)))),
            "z2": float(np.max(np.abs(self.z2.T @ self.z2 - np.eye(2)))),
            "w": float(np.max(np.abs(self.w.conj().T @ self.w - np.eye(4)))),
        }


ISOMETRIES = IsometryPair(Z1, Z2, W)


def _square(a, n: int, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.shape != (n, n):
        raise DimensionError(f"{name} must be {n}x{n}, got {arr.shape}")
    return arr


def direct_sum_reduce(a, b) -> np.ndarray:
    """
    (A + sigma_y B^T sigma_y) / 2: its ordinary shadow is the entangled shadow of A (+) B.
    """
    a = _square(a, 2, "A")
    b = _square(b, 2, "B")
    return 0.5 * (a + SIGMA_Y @ b.T @ SIGMA_Y)


def direct_sum(a, b) -> np.ndarray:
    a = _square(a, 2, "A")
    b = _square(b, 2, "B")
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = a
    out[2:, 2:] = b
    return out


def real_entangled_components(a) -> tuple[np.ndarray, np.ndarray]:
    """
    (Z1^T A Z1, Z2^T A Z2); the real entangled shadow is the 1/2-1/2 mixture of their real shadows.
    """
    a = _square(a, 4, "A")
    return Z1.T @ a @ Z1, Z2.T @ a @ Z2


def complex_entangled_transform(a) -> np.ndarray:
    """
    W^dagger A W; its real shadow is the complex entangled shadow of A.
    """
    a = _square(a, 4, "A")
    return W.conj().T @ a @ W


def real_symmetric_part(b, rtol: float = 1e-12) -> np.ndarray:
    """
    Real vectors only see the real symmetric part of a Hermitian matrix.
    """
    b = np.asarray(b, dtype=complex)
    sym = 0.5 * (b + b.T)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    if float(np.max(np.abs(sym.imag))) > rtol * scale:
        raise DomainError("Real shadow is complex-valued: symmetric part is not real")
    return sym.real


def real_entangled_parts(a) -> tuple[np.ndarray, np.ndarray]:
    c1, c2 = real_entangled_components(a)
    return real_symmetric_part(c1), real_symmetric_part(c2)


def complex_entangled_matrix(a) -> np.ndarray:
    return real_symmetric_part(complex_entangled_transform(a))
