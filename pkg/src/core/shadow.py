from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import stats

from src.core.curve import CDF_RESOLUTION, numeric_cdf
from src.core.dirichlet import PushforwardDist, collapse_knots, mean_variance
from src.core.entangled import complex_entangled_matrix, real_entangled_parts
from src.core.errors import AnalyticFormUnavailable, DomainError, PointMassError
from src.core.linalg import as_matrix, eigenvalues_hermitian
from src.core.quaternion import quaternion_spectrum
from src.core.realshadow import CHEBYSHEV_ORDER, NEAR_KNOT_FRACTION, pushforward_density
from src.core.states import (
    COMPLEX_PURE,
    ENTANGLED_COMPLEX,
    ENTANGLED_REAL,
    INDUCED_MIXED,
    QUATERNION_PURE,
    REAL_INDUCED_MIXED,
    REAL_PURE,
    EnsembleSpec,
)
from src.utils.log import get_logger

logger = get_logger("shadow")


@dataclass(frozen=True, eq=False)
class ShadowComponent:
    """
    One D(a; k) part of a shadow with its mixture weight. `density` is None for a point mass.
    """

    dist: PushforwardDist
    weight: float
    density: Callable[[float], float] | None
    cdf_resolution: int = CDF_RESOLUTION

    @property
    def is_atom(self) -> bool:
        return self.density is None

    @property
    def knots(self) -> tuple[float, ...]:
        return self.dist.a

    @cached_property
    def cdf(self) -> Callable:
        if self.is_atom:
            loc = self.dist.a[0]
            return lambda x: np.where(np.asarray(x, dtype=float) >= loc, 1.0, 0.0)
        if self.dist.n == 2:
            (a1, a2), (k1, k2) = self.dist.a, self.dist.k
            # X = a1 + (a2 - a1) T_2, T_2 ~ Beta(k2, k1)
            return stats.beta(k2, k1, loc=a1, scale=a2 - a1).cdf
        return numeric_cdf(self.density, self.knots, self.cdf_resolution)


class ShadowModel:
    """
    Closed-form shadow of one matrix under one ensemble: a finite mixture of pushforwards.
    """

    def __init__(self, ensemble: str, components: list[ShadowComponent]):
        if not components:
            raise DomainError("A shadow model needs at least one component")
        total = math.fsum(c.weight for c in components)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"Mixture weights sum to {total}, expected 1")
        self.ensemble = ensemble
        self.components = tuple(components)

    @property
    def knots(self) -> tuple[float, ...]:
        return tuple(sorted({a for c in self.components for a in c.knots}))

    @property
    def support(self) -> tuple[float, float]:
        return self.knots[0], self.knots[-1]

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(c.dist.a[0], c.weight) for c in self.components if c.is_atom]

    def density(self, x: float) -> float:
        """
        Density of the continuous part; point masses are reported by `atoms`.
        """
        return math.fsum(c.weight * c.density(x) for c in self.components if not c.is_atom)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c.weight * np.asarray(c.cdf(x), dtype=float) for c in self.components)

    def mean_variance(self) -> tuple[float, float]:
        parts = [(c.weight, *mean_variance(c.dist)) for c in self.components]
        mean = math.fsum(w * m for w, m, _ in parts)
        second = math.fsum(w * (v + m * m) for w, m, v in parts)
        return mean, max(second - mean * mean, 0.0)


def _parts(a: np.ndarray, spec: EnsembleSpec) -> list[tuple[np.ndarray, float, float]]:
    """
    (eigenvalues, Dirichlet weight, mixture weight) for every component.
    """
    kind = spec.kind
    if kind == COMPLEX_PURE:
        return [(eigenvalues_hermitian(a), 1.0, 1.0)]
    if kind == INDUCED_MIXED:
        return [(eigenvalues_hermitian(a), float(spec.copies), 1.0)]
    if kind in (REAL_PURE, REAL_INDUCED_MIXED):
        # real vectors only see Re(A)
        values = eigenvalues_hermitian(np.real(a))
        k = 0.5 if kind == REAL_PURE else spec.copies / 2.0
        return [(values, k, 1.0)]
    if kind == QUATERNION_PURE:
        return [(quaternion_spectrum(a), 2.0, 1.0)]
    if kind == ENTANGLED_REAL:
        return [(eigenvalues_hermitian(b), 0.5, 0.5) for b in real_entangled_parts(a)]
    if kind == ENTANGLED_COMPLEX:
        return [(eigenvalues_hermitian(complex_entangled_matrix(a)), 0.5, 1.0)]
    raise DomainError(f"Unknown ensemble '{kind}'")


def build_model(
    matrix,
    ensemble: EnsembleSpec | str,
    n: int = CHEBYSHEV_ORDER,
    *,
    method: str = "auto",
    near_knot: float = NEAR_KNOT_FRACTION,
    cdf_resolution: int = CDF_RESOLUTION,
) -> ShadowModel:
    """
    Raises AnalyticFormUnavailable when some component has no closed form and
    PointMassError when the whole shadow sits at one point.
    """
    m = as_matrix(matrix)
    if not m.hermitian:
        raise AnalyticFormUnavailable("Closed-form shadows are implemented for Hermitian matrices")
    if isinstance(ensemble, str):
        ensemble = EnsembleSpec.parse(ensemble, m.n)
    a = np.asarray(m.entries)

    components = []
    for values, k, weight in _parts(a, ensemble):
        dist = collapse_knots(PushforwardDist.of(values, k))
        density = (
            None if dist.n == 1
            else pushforward_density(dist, n, method=method, near_knot=near_knot)
        )
        components.append(ShadowComponent(dist, weight, density, cdf_resolution))

    atoms = {c.dist.a[0] for c in components if c.is_atom}
    if len(atoms) == 1 and all(c.is_atom for c in components):
        raise PointMassError(atoms.pop())

    logger.debug(
        f"{ensemble.label} model: "
        + ", ".join(f"{c.weight:g} x D({c.dist.a}; {c.dist.k})" for c in components)
    )
    return ShadowModel(ensemble.label, components)
