from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from scipy import stats

from src.core.errors import DimensionError, DomainError
from src.core.linalg import as_matrix, partial_trace_2
from src.core.quaternion import nu_stack
from src.utils.log import get_logger

logger = get_logger("states")

COMPLEX_PURE = "complex"
REAL_PURE = "real"
QUATERNION_PURE = "quaternion"
INDUCED_MIXED = "mixed"
REAL_INDUCED_MIXED = "real-mixed"
ENTANGLED_COMPLEX = "entangled-complex"
ENTANGLED_REAL = "entangled-real"

KINDS = (
    COMPLEX_PURE,
    REAL_PURE,
    QUATERNION_PURE,
    INDUCED_MIXED,
    REAL_INDUCED_MIXED,
    ENTANGLED_COMPLEX,
    ENTANGLED_REAL,
)
MIXED_KINDS = (INDUCED_MIXED, REAL_INDUCED_MIXED)
ENTANGLED_KINDS = (ENTANGLED_COMPLEX, ENTANGLED_REAL)

# samples per independent random stream; part of the reproducibility contract
STREAM_BLOCK = 4096


@dataclass(frozen=True)
class EnsembleSpec:
    """
    kind + the matrix dimension it acts on; `copies` is K for induced mixed states.
    """

    kind: str
    dimension: int
    copies: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"Unknown ensemble '{self.kind}'. Expected one of {KINDS}")
        if self.dimension < 1:
            raise DomainError("Ensemble dimension must be positive")
        if self.copies < 1:
            raise DomainError("Induced mixed states need K >= 1")
        if self.kind in ENTANGLED_KINDS and self.dimension != 4:
            raise DomainError("Maximally entangled ensembles are implemented for 2x2 systems (N=4)")
        if self.kind == QUATERNION_PURE and self.dimension % 2:
            raise DomainError("Quaternion ensemble needs an even matrix dimension")

    @classmethod
    def parse(cls, text: str, dimension: int) -> "EnsembleSpec":
        kind, _, arg = text.strip().partition(":")
        if arg and kind not in MIXED_KINDS:
            raise DomainError(f"Ensemble '{kind}' takes no parameter")
        if kind in MIXED_KINDS and not arg:
            raise DomainError(f"Ensemble '{kind}' needs K, e.g. '{kind}:2'")
        try:
            copies = int(arg) if arg else 1
        except ValueError as e:
            raise DomainError(f"Invalid K in ensemble '{text}'") from e
        return cls(kind, dimension, copies)

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.copies}" if self.kind in MIXED_KINDS else self.kind

    @property
    def state_dimension(self) -> int:
        return self.dimension // 2 if self.kind == QUATERNION_PURE else self.dimension


@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    """
    Sorted Monte Carlo shadow values. Complex values are sorted by (real, imag).
    """

    values: np.ndarray
    seed: int | None
    ensemble: str

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def marginal(self, part: str = "real") -> "EmpiricalSample":
        if part not in ("real", "imag"):
            raise DomainError(f"Unknown marginal '{part}'")
        data = self.values.real if part == "real" else np.asarray(self.values).imag
        return EmpiricalSample(np.sort(np.asarray(data, dtype=float)), self.seed, self.ensemble)

    def ecdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.count

    def mean(self) -> float:
        return float(np.mean(self.values))

    def variance(self) -> float:
        return float(np.var(self.values))

    def central_moment(self, order: int) -> float:
        return float(np.mean((self.values - np.mean(self.values)) ** order))


def _sphere(rng: np.random.Generator, shape: tuple[int, ...], field: str) -> np.ndarray:
    """
    Normalized Gaussian vectors over the last axis (last two axes for field="quaternion").
    """
    if field == "complex":
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    else:
        z = rng.standard_normal(shape)
    axes = (-2, -1) if field == "quaternion" else (-1,)
    norm = np.sqrt(np.sum(np.abs(z) ** 2, axis=axes, keepdims=True))
    return z / norm


def _pure_batch(kind: str, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if kind == COMPLEX_PURE:
        return _sphere(rng, (size, n), "complex")
    if kind == REAL_PURE:
        return _sphere(rng, (size, n), "real")
    if kind == QUATERNION_PURE:
        return nu_stack(_sphere(rng, (size, n, 4), "quaternion"))
    raise DomainError(f"'{kind}' is not a pure-state ensemble")


def sample_pure(kind: str, n: int, seed=None) -> np.ndarray:
    """
    Unit vector over C, R or H (quaternions as their 2N x 2 nu-image).
    """
    if n < 1:
        raise DomainError("State dimension must be positive")
    return _pure_batch(kind, n, 1, np.random.default_rng(seed))[0]


def real_entangled_state(theta: float, det: int = 1) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    if det == 1:
        o = np.array([[c, -s], [s, c]])
    elif det == -1:
        o = np.array([[c, s], [s, -c]])
    else:
        raise DomainError("det must be +1 or -1")
    return o.reshape(-1, order="F") / math.sqrt(2.0)


def _entangled_batch(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    if kind == ENTANGLED_REAL:
        theta = rng.uniform(0.0, 2.0 * np.pi, size)
        det = np.where(rng.random(size) < 0.5, 1.0, -1.0)
        c, s = np.cos(theta), np.sin(theta)
        # vec(O) column-major: (O00, O10, O01, O11)
        return np.stack([c, s, -det * s, det * c], axis=-1) / math.sqrt(2.0)
    if kind == ENTANGLED_COMPLEX:
        r = _sphere(rng, (size, 4), "real")
        z1 = r[:, 0] + 1j * r[:, 1]
        z2 = r[:, 2] + 1j * r[:, 3]
        # V = [[z2, z1], [-conj(z1), conj(z2)]] is Haar on SU(2)
        return np.stack([z2, -z1.conj(), z1, z2.conj()], axis=-1) / math.sqrt(2.0)
    raise DomainError(f"'{kind}' is not a maximally entangled ensemble")


def sample_max_entangled(kind: str, seed=None) -> np.ndarray:
    kind = {"real": ENTANGLED_REAL, "complex": ENTANGLED_COMPLEX}.get(kind, kind)
    return _entangled_batch(kind, 1, np.random.default_rng(seed))[0]


def _ginibre(rng: np.random.Generator, size: int, n: int, k: int, real: bool) -> np.ndarray:
    field = "real" if real else "complex"
    g = _sphere(rng, (size, n * k), field)
    return g.reshape(size, n, k)


def sample_induced_mixed(n: int, k: int, seed=None, real: bool = False) -> np.ndarray:
    """
    rho = Tr_2 |psi><psi| for a uniformly random unit psi in C^n (x) C^k.
    """
    if n < 1 or k < 1:
        raise DomainError("Induced mixed states need N, K >= 1")
    psi = _ginibre(np.random.default_rng(seed), 1, n, k, real)[0].reshape(n * k)
    return partial_trace_2(np.outer(psi, psi.conj()), n, k)


def shadow_expectation(matrix, state, *, quaternion: bool = False) -> complex:
    """
    <u|A|u> for vectors, Tr(A rho) for density matrices, 1/2 Tr(nu^dagger A nu) for quaternions.
    """
    a = np.asarray(as_matrix(matrix).entries)
    st = np.asarray(state)
    n = a.shape[0]
    if quaternion:
        if st.shape != (n, 2):
            raise DimensionError(f"Quaternion state must have shape {(n, 2)}, got {st.shape}")
        return complex(0.5 * np.trace(st.conj().T @ a @ st))
    if st.ndim == 1:
        if st.shape[0] != n:
            raise DimensionError(f"State of length {st.shape[0]} for a {n}x{n} matrix")
        return complex(st.conj() @ a @ st)
    if st.shape != (n, n):
        raise DimensionError(f"Density matrix must be {n}x{n}, got {st.shape}")
    return complex(np.trace(a @ st))


def _shadow_batch(a: np.ndarray, spec: EnsembleSpec, size: int, rng: np.random.Generator):
    kind = spec.kind
    if kind in (COMPLEX_PURE, REAL_PURE):
        u = _pure_batch(kind, spec.dimension, size, rng)
        return np.einsum("bi,ij,bj->b", u.conj(), a, u)
    if kind == QUATERNION_PURE:
        nu = _pure_batch(kind, spec.state_dimension, size, rng)
        return 0.5 * np.einsum("bik,ij,bjk->b", nu.conj(), a, nu)
    if kind in MIXED_KINDS:
        g = _ginibre(rng, size, spec.dimension, spec.copies, kind == REAL_INDUCED_MIXED)
        return np.einsum("bik,ij,bjk->b", g.conj(), a, g)
    psi = _entangled_batch(kind, size, rng)
    return np.einsum("bi,ij,bj->b", psi.conj(), a, psi)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """
    Independent stream for one block, keyed by (seed, block index).
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def collect_shadow(
    matrix,
    ensemble: EnsembleSpec,
    n: int,
    seed: int | None = None,
    *,
    block: int = STREAM_BLOCK,
    workers: int = 1,
    blocks_per_task: int = 1,
) -> EmpiricalSample:
    """
    n shadow values. Block b always draws from block_rng(seed, b), so the result does not
    depend on `workers` or `blocks_per_task`.
    """
    if n < 1:
        raise DomainError("Sample count must be at least 1")
    a = np.asarray(as_matrix(matrix).entries)
    if a.shape[0] != ensemble.dimension:
        raise DimensionError(
            f"Ensemble built for dimension {ensemble.dimension}, "
            f"matrix is {a.shape[0]}x{a.shape[0]}"
        )
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        logger.info(f"No seed given; drew seed {seed}")

    n_blocks = math.ceil(n / block)
    sizes = [min(block, n - b * block) for b in range(n_blocks)]
    tasks = [
        list(range(start, min(start + blocks_per_task, n_blocks)))
        for start in range(0, n_blocks, blocks_per_task)
    ]

    def run(task: list[int]) -> list[np.ndarray]:
        return [_shadow_batch(a, ensemble, sizes[b], block_rng(seed, b)) for b in task]

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = [chunk for result in pool.map(run, tasks) for chunk in result]
    else:
        parts = [chunk for task in tasks for chunk in run(task)]

    values = np.concatenate(parts)
    if as_matrix(matrix).hermitian:
        values = np.sort(values.real)
    else:
        values = values[np.lexsort((values.imag, values.real))]
    return EmpiricalSample(values, seed, ensemble.label)


def _evaluate(fn: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(x))) for x in xs])


def ks_distance(sample: EmpiricalSample, cdf: Callable) -> float:
    """
    sup_x |F_n(x) - cdf(x)|, taken at each sample point from both sides of the ECDF jump.
    """
    if sample.count == 0:
        raise DomainError("Empty sample")
    if sample.is_complex:
        raise DomainError("Complex sample: compare its real and imaginary marginals separately")
    points = np.unique(sample.values)
    above = sample.ecdf(points)
    below = np.searchsorted(sample.values, points, side="left") / sample.count
    model = _evaluate(cdf, points)
    return float(max(np.max(np.abs(above - model)), np.max(np.abs(below - model))))


def ks_pvalue(distance: float, n: int) -> float:
    return float(stats.kstwo.sf(distance, n))


def histogram(sample: EmpiricalSample, bins: int, value_range=None) -> pd.DataFrame:
    if bins < 1:
        raise DomainError("Histogram needs at least one bin")
    values = np.asarray(sample.values, dtype=float)
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})
