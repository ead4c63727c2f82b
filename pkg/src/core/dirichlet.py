from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import special

from src.core.errors import ConvergenceError, DimensionError, DomainError
from src.utils.log import get_logger

logger = get_logger("dirichlet")

SURVIVAL_DEGREE_CAP = 200
SURVIVAL_TAIL_TOL = 1e-12
COLLAPSE_RTOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """
    Ascending knots a_1 <= ... <= a_N.
    """

    a: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.a)
        if not values:
            raise DomainError("Spectrum needs at least one knot")
        if any(not math.isfinite(v) for v in values):
            raise DomainError("Spectrum knots must be finite")
        if any(values[i] > values[i + 1] for i in range(len(values) - 1)):
            raise DomainError(f"Spectrum must be non-decreasing: {values}")
        object.__setattr__(self, "a", values)

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        return cls(tuple(sorted(float(v) for v in np.ravel(values))))

    def __len__(self) -> int:
        return len(self.a)

    @property
    def span(self) -> float:
        return self.a[-1] - self.a[0]

    def as_array(self) -> np.ndarray:
        return np.array(self.a, dtype=float)


@dataclass(frozen=True)
class DirichletParams:
    k: tuple[float, ...]
    k_tilde: float = field(init=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.k)
        if not values:
            raise DomainError("Dirichlet parameters need at least one weight")
        if any(not (v > 0 and math.isfinite(v)) for v in values):
            raise DomainError(f"Dirichlet weights must be positive: {values}")
        object.__setattr__(self, "k", values)
        object.__setattr__(self, "k_tilde", math.fsum(values))

    def __len__(self) -> int:
        return len(self.k)


@dataclass(frozen=True)
class PushforwardDist:
    """
    Law of X = sum a_i T_i with T ~ Dirichlet(k), i.e. D(a; k).
    """

    spectrum: Spectrum
    params: DirichletParams

    def __post_init__(self):
        if len(self.spectrum) != len(self.params):
            raise DimensionError(
                f"{len(self.spectrum)} knots but {len(self.params)} Dirichlet weights"
            )

    @classmethod
    def of(cls, a: Sequence[float], k) -> "PushforwardDist":
        a = [float(v) for v in a]
        if np.isscalar(k):
            k = [float(k)] * len(a)
        pairs = sorted(zip(a, k), key=lambda item: item[0])
        return cls(
            Spectrum(tuple(p[0] for p in pairs)),
            DirichletParams(tuple(p[1] for p in pairs)),
        )

    @property
    def a(self) -> tuple[float, ...]:
        return self.spectrum.a

    @property
    def k(self) -> tuple[float, ...]:
        return self.params.k

    @property
    def n(self) -> int:
        return len(self.spectrum)


def as_spectrum(spectrum) -> Spectrum:
    if isinstance(spectrum, Spectrum):
        return spectrum
    return Spectrum.from_values(spectrum)


def pochhammer(x: float, n: int) -> float:
    if n < 0:
        raise DomainError("Pochhammer index must be non-negative")
    return float(math.prod(x + i for i in range(n)))


def dirichlet_moment(params: DirichletParams, alpha: Sequence[int]) -> float:
    if len(alpha) != len(params.k):
        raise DimensionError(f"Multi-index has {len(alpha)} entries, expected {len(params.k)}")
    num = math.prod(pochhammer(k, int(m)) for k, m in zip(params.k, alpha))
    return num / pochhammer(params.k_tilde, int(sum(alpha)))


def mgf_eval(dist: PushforwardDist, r: float) -> float:
    """
    prod (1 - r a_i)^(-k_i), which equals E[(1 - rX)^(-k_tilde)].
    """
    factors = [1.0 - r * a for a in dist.a]
    if any(f <= 0 for f in factors):
        raise DomainError(f"r={r} leaves the domain of the generating function")
    return math.prod(f ** (-k) for f, k in zip(factors, dist.k))


def mean_variance(dist: PushforwardDist) -> tuple[float, float]:
    kt = dist.params.k_tilde
    mean = math.fsum(k * a for k, a in zip(dist.k, dist.a)) / kt
    var = math.fsum(k * (a - mean) ** 2 for k, a in zip(dist.k, dist.a)) / (kt * (kt + 1.0))
    return mean, var


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """
    All multi-indices of length `parts` with |alpha| == total.
    """
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in compositions(total - head, parts - 1):
            yield (head,) + tail


def pushforward_moment(dist: PushforwardDist, n: int) -> float:
    """
    E[X^n] via the multinomial expansion and the Dirichlet integral.
    """
    total = 0.0
    for alpha in compositions(n, dist.n):
        coef = math.factorial(n) / math.prod(math.factorial(m) for m in alpha)
        mono = math.prod(a**m for a, m in zip(dist.a, alpha))
        total += coef * mono * dirichlet_moment(dist.params, alpha)
    return total


class _ProductSeries:
    """
    Incremental Taylor coefficients of prod (1 - u_i t)^(-k_i) using
    m c_m = sum_{j=1..m} p_j c_{m-j},  p_j = sum_i k_i u_i^j.
    """

    def __init__(self, u: Sequence[float], k: Sequence[float]):
        self._u = np.asarray(u, dtype=float)
        self._k = np.asarray(k, dtype=float)
        self._pow = np.ones_like(self._u)
        self.p: list[float] = [0.0]
        self.c: list[float] = [1.0]

    def next(self) -> float:
        m = len(self.c)
        self._pow = self._pow * self._u
        self.p.append(float(np.dot(self._k, self._pow)))
        cm = math.fsum(self.p[j] * self.c[m - j] for j in range(1, m + 1)) / m
        self.c.append(cm)
        return cm


def series_coefficients(u: Sequence[float], k: Sequence[float], degree: int) -> list[float]:
    series = _ProductSeries(u, k)
    for _ in range(degree):
        series.next()
    return list(series.c)


def survival_series(
    dist: PushforwardDist,
    x: float,
    tol: float = SURVIVAL_TAIL_TOL,
    degree_cap: int = SURVIVAL_DEGREE_CAP,
) -> float:
    """
    1 - F(x) for a_{N-1} < x <= a_N, summed degree by degree.
    """
    a, k = dist.a, dist.k
    n = len(a)
    if n < 2:
        raise DomainError("Survival series needs at least two knots")
    top, below = a[-1], a[-2]
    if not below < top:
        raise DomainError("Top knot is repeated; collapse knots first")
    if not (below < x <= top):
        raise DomainError(f"x={x} outside ({below}, {top}]")
    if x == top:
        return 0.0

    kt, kn = dist.params.k_tilde, k[-1]
    rest = kt - kn
    gap = top - x
    prefactor = (
        gap**rest
        / special.beta(kn, rest)
        * math.prod((top - ai) ** (-ki) for ai, ki in zip(a[:-1], k[:-1]))
    )
    series = _ProductSeries([gap / (top - ai) for ai in a[:-1]], k[:-1])

    total = prefactor / rest
    ratio = 1.0 / rest
    for m in range(1, degree_cap + 1):
        # (1-k_N)_m / (k~ - k_N)_{m+1}, advanced one step
        ratio *= (1.0 - kn + m - 1) / (rest + m)
        increment = prefactor * ratio * series.next()
        total += increment
        if abs(increment) < tol:
            return total
    raise ConvergenceError(
        f"Survival series did not reach tolerance {tol:g} within degree {degree_cap} at x={x}"
    )


def density_n2(dist: PushforwardDist, x: float) -> float:
    if dist.n != 2:
        raise DomainError("density_n2 needs exactly two knots")
    (a1, a2), (k1, k2) = dist.a, dist.k
    if not a1 < a2:
        raise DomainError("density_n2 needs distinct knots")
    if not (a1 <= x <= a2):
        raise DomainError(f"x={x} outside [{a1}, {a2}]")
    e1, e2 = k1 - 1.0, k2 - 1.0
    if (x == a2 and e1 < 0) or (x == a1 and e2 < 0):
        return math.inf
    return (a2 - x) ** e1 * (x - a1) ** e2 / (special.beta(k1, k2) * (a2 - a1) ** (k1 + k2 - 1.0))


def collapse_knots(dist: PushforwardDist, atol: float | None = None) -> PushforwardDist:
    """
    Merge runs of (numerically) equal knots, summing their weights.
    """
    a, k = dist.a, dist.k
    if atol is None:
        atol = COLLAPSE_RTOL * max(1.0, abs(a[-1]), abs(a[0]))
    groups: list[list[int]] = [[0]]
    for i in range(1, len(a)):
        if a[i] - a[groups[-1][-1]] <= atol:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) == len(a):
        return dist
    knots, weights = [], []
    for g in groups:
        w = math.fsum(k[i] for i in g)
        knots.append(math.fsum(k[i] * a[i] for i in g) / w)
        weights.append(w)
    return PushforwardDist(Spectrum(tuple(knots)), DirichletParams(tuple(weights)))


def sample_simplex(params: DirichletParams, seed=None, size: int | None = None) -> np.ndarray:
    """
    Dirichlet draws as normalized Gamma(k_i, 1) variates.
    `seed` may be an int, a SeedSequence or a Generator.
    """
    rng = np.random.default_rng(seed)
    shape = (len(params),) if size is None else (size, len(params))
    g = rng.standard_gamma(np.asarray(params.k), size=shape)
    return g / g.sum(axis=-1, keepdims=True)
