from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.core.errors import ConvergenceError, DimensionError, DomainError, MatrixParseError

HERMITIAN_RTOL = 1e-12
JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 60

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    """
    Dense square complex matrix with its structural flags checked once on construction.
    """

    entries: np.ndarray
    hermitian: bool
    real: bool

    @classmethod
    def from_array(cls, data, rtol: float = HERMITIAN_RTOL) -> "ComplexMatrix":
        arr = np.array(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionError(f"Expected a non-empty square matrix, got shape {arr.shape}")
        scale = max(float(np.max(np.abs(arr))), 1e-300)
        hermitian = float(np.max(np.abs(arr - arr.conj().T))) < rtol * scale
        real = float(np.max(np.abs(arr.imag))) < rtol * scale
        arr.setflags(write=False)
        return cls(arr, hermitian, real)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def real_symmetric(self) -> bool:
        return self.hermitian and self.real

    def dagger(self) -> "ComplexMatrix":
        return ComplexMatrix.from_array(self.entries.conj().T)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def as_matrix(data) -> ComplexMatrix:
    if isinstance(data, ComplexMatrix):
        return data
    return ComplexMatrix.from_array(data)


def _real_embedding(a: np.ndarray) -> np.ndarray:
    # [[Re, -Im], [Im, Re]] is real symmetric when a is Hermitian
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def jacobi_eigh(
    m: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi rotations on a real symmetric matrix.
    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    total = float(np.linalg.norm(a))
    if n == 1 or total == 0.0:
        return np.diag(a).copy(), v

    for _ in range(max_sweeps):
        off = float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))
        if off <= tol * total:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def _hermitian_or_fail(matrix) -> ComplexMatrix:
    a = as_matrix(matrix)
    if not a.hermitian:
        raise DomainError("Eigensolver expects a Hermitian matrix")
    return a


def eigenvalues_hermitian(matrix, tol: float = JACOBI_TOL) -> np.ndarray:
    """
    Ascending spectrum of a Hermitian matrix.

    Works on the 2N x 2N real embedding, where every eigenvalue shows up twice;
    sorted pairs are folded back into one value each.
    """
    a = _hermitian_or_fail(matrix)
    if a.real:
        values, _ = jacobi_eigh(a.entries.real, tol=tol)
        return np.sort(values)
    values, _ = jacobi_eigh(_real_embedding(a.entries), tol=tol)
    doubled = np.sort(values)
    return 0.5 * (doubled[0::2] + doubled[1::2])


def eigen_residual(matrix, tol: float = JACOBI_TOL) -> float:
    """
    max ||Av - lv|| / ||A|| over the Jacobi eigenpairs.
    """
    a = _hermitian_or_fail(matrix)
    emb = _real_embedding(a.entries)
    values, vectors = jacobi_eigh(emb, tol=tol)
    n = a.n
    worst = 0.0
    for idx in range(2 * n):
        x = vectors[:n, idx]
        y = vectors[n:, idx]
        vec = x + 1j * y
        norm = np.linalg.norm(vec)
        r = a.entries @ vec - values[idx] * vec
        worst = max(worst, float(np.linalg.norm(r) / norm))
    scale = max(float(np.linalg.norm(a.entries, 2)), 1e-300)
    return worst / scale


def partial_trace_2(matrix, n: int, k: int) -> np.ndarray:
    """
    Trace out the second factor of C^n (x) C^k.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.shape != (n * k, n * k):
        raise DimensionError(f"Expected shape {(n * k, n * k)}, got {a.shape}")
    return np.trace(a.reshape(n, k, n, k), axis1=1, axis2=3)


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def haar_unitary(n: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def haar_orthogonal(n: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def parse_complex(token) -> complex:
    """
    Accepts numbers and strings like '0.3-0.5i', '-i', '2', '1e-3+2i'.
    """
    if isinstance(token, (int, float, complex)) and not isinstance(token, bool):
        return complex(token)
    text = _WHITESPACE.sub("", str(token)).replace("I", "i").replace("j", "i")
    if not text:
        raise MatrixParseError("Empty matrix entry")
    if text.endswith("i"):
        body = text[:-1]
        # bare 'i', '+i', '-i', '2+i'
        if body == "" or body[-1] in "+-":
            body += "1"
        text = body + "j"
    try:
        return complex(text)
    except ValueError as e:
        raise MatrixParseError(f"Cannot parse matrix entry '{token}'") from e


def matrix_from_rows(rows: Sequence[Sequence]) -> ComplexMatrix:
    parsed = [[parse_complex(v) for v in row] for row in rows]
    widths = {len(r) for r in parsed}
    if len(widths) != 1 or widths.pop() != len(parsed):
        raise MatrixParseError("Matrix rows must form a square table")
    return ComplexMatrix.from_array(parsed)
