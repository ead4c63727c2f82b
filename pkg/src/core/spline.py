from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from src.core.dirichlet import (
    PushforwardDist,
    as_spectrum,
    collapse_knots,
    compositions,
    pochhammer,
    series_coefficients,
)
from src.core.errors import DomainError, PointMassError
from src.core.linalg import eigenvalues_hermitian
from src.utils.log import get_logger

logger = get_logger("spline")

ILL_CONDITIONED_GAP = 1e-6


@dataclass(frozen=True)
class PartialFractionTable:
    """
    beta[i][j-1] is the coefficient of (1 - r a_i)^(-j) in prod (1 - r a_i)^(-k_i).
    """

    knots: tuple[float, ...]
    k: tuple[int, ...]
    beta: tuple[tuple[float, ...], ...]

    def total(self) -> float:
        return math.fsum(b for row in self.beta for b in row)

    def evaluate(self, r: float) -> float:
        return math.fsum(
            b * (1.0 - r * a) ** (-(j + 1))
            for a, row in zip(self.knots, self.beta)
            for j, b in enumerate(row)
        )


def _integer_weights(k, n: int) -> tuple[int, ...]:
    if np.isscalar(k):
        k = [k] * n
    if len(k) != n:
        raise DomainError(f"{len(k)} weights for {n} knots")
    out = []
    for v in k:
        iv = int(round(float(v)))
        if iv < 1 or abs(iv - float(v)) > 1e-9:
            raise DomainError(f"Spline weights must be positive integers, got {v}")
        out.append(iv)
    return tuple(out)


def _check_knots(a: Sequence[float]):
    if any(a[i] >= a[i + 1] for i in range(len(a) - 1)):
        raise DomainError(f"Knots must be pairwise distinct: {tuple(a)}")
    if any(v == 0.0 for v in a):
        raise DomainError("Partial fractions need nonzero knots; translate first")


def _beta_series(a: Sequence[float], k: Sequence[int], i: int) -> tuple[float, ...]:
    # around w = 1 - r a_i the other factors are
    # prod_l (a_i / (a_i - a_l))^k_l (1 - v_l w)^(-k_l), v_l = -a_l / (a_i - a_l)
    others = [l for l in range(len(a)) if l != i]
    const = math.prod((a[i] / (a[i] - a[l])) ** k[l] for l in others)
    v = [-a[l] / (a[i] - a[l]) for l in others]
    c = series_coefficients(v, [k[l] for l in others], k[i] - 1)
    # beta_{i, k_i - m} = C_m
    return tuple(const * c[k[i] - j] for j in range(1, k[i] + 1))


def _beta_closed(a: Sequence[float], kk: int, i: int) -> tuple[float, ...]:
    n = len(a)
    others = [l for l in range(n) if l != i]
    row = []
    for j in range(1, kk + 1):
        m = kk - j
        acc = 0.0
        for alpha in compositions(m, n - 1):
            term = 1.0
            for l, al in zip(others, alpha):
                denom = math.factorial(al) * (a[i] - a[l]) ** (kk + al)
                term *= pochhammer(kk, al) * a[l] ** al / denom
            acc += term
        row.append((-1) ** m * a[i] ** ((n - 1) * kk) * acc)
    return tuple(row)


def partial_fractions(spectrum, k, method: str = "auto") -> PartialFractionTable:
    """
    Coefficients of prod (1 - r a_i)^(-k_i) = sum_i sum_j beta_ij (1 - r a_i)^(-j).

    method="closed" uses the equal-weight closed form, "series" the Taylor
    expansion around each pole (any integer weights), "auto" picks closed when it applies.
    """
    a = as_spectrum(spectrum).a
    _check_knots(a)
    kk = _integer_weights(k, len(a))
    if method == "auto":
        method = "closed" if len(set(kk)) == 1 else "series"
    if method == "closed":
        if len(set(kk)) != 1:
            raise DomainError("Closed-form coefficients need equal weights")
        beta = tuple(_beta_closed(a, kk[0], i) for i in range(len(a)))
    elif method == "series":
        beta = tuple(_beta_series(a, kk, i) for i in range(len(a)))
    else:
        raise DomainError(f"Unknown partial fraction method '{method}'")
    return PartialFractionTable(tuple(a), kk, beta)


@lru_cache(maxsize=256)
def _cached_table(a: tuple[float, ...], k: tuple[int, ...]) -> PartialFractionTable:
    return partial_fractions(a, k)


def _prepare(spectrum, k) -> tuple[tuple[float, ...], tuple[int, ...]]:
    a = as_spectrum(spectrum).a
    kk = _integer_weights(k, len(a))
    span = a[-1] - a[0]
    if len(a) > 1 and min(a[i + 1] - a[i] for i in range(len(a) - 1)) < ILL_CONDITIONED_GAP * span:
        logger.warning(
            f"Knots closer than {ILL_CONDITIONED_GAP:g} of the span; collapsing before evaluation"
        )
        merged = collapse_knots(PushforwardDist.of(a, kk), atol=ILL_CONDITIONED_GAP * span)
        a, kk = merged.a, _integer_weights(merged.k, merged.n)
    if any(a[i] >= a[i + 1] for i in range(len(a) - 1)):
        raise DomainError(f"Knots must be strictly increasing: {a}")
    if len(a) == 1:
        raise PointMassError(a[0])
    return a, kk


def spline_density(spectrum, k, x: float) -> float:
    """
    Piecewise-polynomial density of D(a; k) for integer weights (degree k_tilde - 2).
    """
    a, kk = _prepare(spectrum, k)
    if x < a[0] or x > a[-1]:
        return 0.0
    shift = 1.0 - a[0] if a[0] <= 0 else 0.0
    if shift:
        a = tuple(v + shift for v in a)
        x = x + shift
    table = _cached_table(a, kk)
    kt = sum(kk)
    total = 0.0
    for ai, row in zip(a, table.beta):
        y = x / ai
        upper = 1.0 - y
        for j, b in enumerate(row, start=1):
            e = kt - j - 1
            if e == 0:
                tail = 1.0 if upper > 0 else 0.0
            else:
                tail = max(upper, 0.0) ** e
            if tail == 0.0:
                continue
            total += b / (ai * special.beta(j, kt - j)) * y ** (j - 1) * tail
    return max(total, 0.0)


def _hermitian_spectrum(matrix, weight: int) -> tuple[tuple[float, ...], tuple[int, ...]]:
    values = eigenvalues_hermitian(matrix)
    merged = collapse_knots(PushforwardDist.of(values, float(weight)))
    if merged.n == 1:
        raise PointMassError(merged.a[0])
    return merged.a, _integer_weights(merged.k, merged.n)


def complex_shadow_density(matrix, x: float) -> float:
    a, k = _hermitian_spectrum(matrix, 1)
    return spline_density(a, k, x)


def mixed_shadow_density(matrix, K: int, x: float) -> float:
    if int(K) != K or K < 1:
        raise DomainError(f"Environment dimension K must be a positive integer, got {K}")
    a, k = _hermitian_spectrum(matrix, int(K))
    return spline_density(a, k, x)
