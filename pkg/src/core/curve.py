from __future__ import annotations

import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from scipy import integrate

from src.core.errors import DomainError
from src.core.states import EmpiricalSample
from src.utils.log import get_logger

logger = get_logger("curve")

CDF_RESOLUTION = 400
QUAD_LIMIT = 200

Density = Callable[[float], float]


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """
    Sampled density with the knot interval of every point (-1 outside the hull).
    """

    x: np.ndarray
    density: np.ndarray
    segment: np.ndarray
    knots: tuple[float, ...]
    analytic: bool = True

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"x": self.x, "density": self.density, "segment_index": self.segment}
        )


def segment_index(knots: Sequence[float], x: float) -> int:
    if not knots or x < knots[0] or x > knots[-1]:
        return -1
    if len(knots) == 1:
        return 0
    return min(bisect_right(knots, x) - 1, len(knots) - 2)


def grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 2:
        raise DomainError(f"A grid needs at least 2 points, got {points}")
    if not lo < hi:
        raise DomainError(f"Empty grid range [{lo}, {hi}]")
    return np.linspace(lo, hi, points)


def tabulate(
    density: Density,
    knots: Sequence[float],
    xs,
    *,
    workers: int = 1,
    analytic: bool = True,
) -> DensityCurve:
    """
    Evaluate `density` at every x. With workers > 1 the grid is split into
    contiguous partitions; values do not depend on the split.
    """
    xs = np.asarray(xs, dtype=float)
    knots = tuple(float(v) for v in knots)

    def run(chunk: np.ndarray) -> list[float]:
        return [float(density(float(x))) for x in chunk]

    if workers > 1 and xs.size > 1:
        chunks = np.array_split(xs, min(workers, xs.size))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = [v for part in pool.map(run, chunks) for v in part]
    else:
        values = run(xs)

    segments = np.array([segment_index(knots, float(x)) for x in xs], dtype=int)
    return DensityCurve(xs, np.array(values, dtype=float), segments, knots, analytic)


def _pieces(
    knots: Sequence[float], lo: float | None, hi: float | None
) -> list[tuple[float, float]]:
    lo = knots[0] if lo is None else lo
    hi = knots[-1] if hi is None else hi
    cuts = sorted({lo, hi, *(k for k in knots if lo < k < hi)})
    return list(zip(cuts[:-1], cuts[1:]))


def integrate_density(
    density: Density,
    knots: Sequence[float],
    weight: Callable[[float], float] | None = None,
    *,
    lo: float | None = None,
    hi: float | None = None,
) -> float:
    """
    integral of weight(x) f(x) dx, one adaptive quadrature per knot interval so
    endpoint singularities sit at interval ends.
    """
    def integrand(x: float) -> float:
        value = density(x)
        return value * weight(x) if weight is not None else value

    total = 0.0
    for a, b in _pieces(knots, lo, hi):
        value, err = integrate.quad(integrand, a, b, limit=QUAD_LIMIT)
        if err > 1e-6 * max(abs(value), 1.0):
            logger.debug(f"quad error estimate {err:.2g} on [{a}, {b}]")
        total += value
    return total


def density_moments(density: Density, knots: Sequence[float]) -> tuple[float, float, float]:
    """
    (mass, mean, variance) of a tabulated density by quadrature.
    """
    mass = integrate_density(density, knots)
    mean = integrate_density(density, knots, lambda x: x) / mass
    var = integrate_density(density, knots, lambda x: (x - mean) ** 2) / mass
    return mass, mean, var


def numeric_cdf(
    density: Density, knots: Sequence[float], resolution: int = CDF_RESOLUTION
) -> Callable:
    """
    CDF from a midpoint rule on x = a + (b - a)(1 - cos t)/2 inside every knot interval.
    The substitution absorbs inverse square-root edges. Normalized to total mass 1.
    """
    knots = sorted(float(v) for v in knots)
    if len(knots) < 2:
        raise DomainError("numeric_cdf needs at least two knots")
    step = math.pi / resolution
    t_mid = (np.arange(resolution) + 0.5) * step
    t_edge = np.arange(resolution + 1) * step

    nodes = [np.array([knots[0]])]
    masses = []
    for a, b in zip(knots[:-1], knots[1:]):
        half = 0.5 * (b - a)
        mid = a + half * (1.0 - np.cos(t_mid))
        f = np.array([density(float(x)) for x in mid])
        masses.append(f * half * np.sin(t_mid) * step)
        nodes.append((a + half * (1.0 - np.cos(t_edge)))[1:])

    xs = np.concatenate(nodes)
    cum = np.concatenate([[0.0], np.cumsum(np.concatenate(masses))])
    total = cum[-1]
    if abs(total - 1.0) > 1e-3:
        logger.warning(f"Density integrates to {total:.6f} on the CDF grid")
    cum = cum / total

    def cdf(x):
        return np.interp(x, xs, cum, left=0.0, right=1.0)

    return cdf


def fallback_curve(sample: EmpiricalSample, bins: int, knots: Sequence[float] = ()) -> DensityCurve:
    """
    Histogram density of a Monte Carlo sample at bin centres, flagged analytic=False.
    """
    values = np.asarray(sample.values.real if sample.is_complex else sample.values, dtype=float)
    if np.ptp(values) == 0:
        raise DomainError("Sample is constant; no histogram density")
    density, edges = np.histogram(values, bins=bins, density=True)
    centres = 0.5 * (edges[:-1] + edges[1:])
    knots = tuple(float(v) for v in knots)
    segments = np.array([segment_index(knots, float(x)) for x in centres], dtype=int)
    return DensityCurve(centres, density.astype(float), segments, knots, analytic=False)
