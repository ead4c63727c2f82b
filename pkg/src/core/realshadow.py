from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from src.core.dirichlet import (
    PushforwardDist,
    as_spectrum,
    collapse_knots,
    density_n2,
    pochhammer,
)
from src.core.errors import AnalyticFormUnavailable, ConvergenceError, DomainError, PointMassError
from src.core.linalg import as_matrix, eigenvalues_hermitian
from src.core.spline import spline_density
from src.utils.log import get_logger

logger = get_logger("realshadow")

CHEBYSHEV_ORDER = 20
TRUNCATED_MIN_ORDER = 64
NEAR_KNOT_FRACTION = 0.25
QUADRATURE_METHODS = ("auto", "chebyshev", "adaptive")
PROXIMITY_WARNING = 1e-8
ELLIPTIC_TOL = 1e-8
ELLIPTIC_CHECK_MAX_Z = 0.9
AGM_TOL = 1e-15
AGM_MAX_STEPS = 64
HYP2F1_TOL = 1e-14
HYP2F1_MAX_TERMS = 100_000
CONTINUITY_TOL = 1e-3
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 200

# one-sided probe offsets per derivative order, as a fraction of the span
PROBE_OFFSETS = {0: 1e-10, 1: 1e-9, 2: 1e-6}
PROBE_DEFAULT = 1e-4

Density = Callable[[float], float]


def gauss_chebyshev(h: Callable, a: float, b: float, n: int = CHEBYSHEV_ORDER) -> float:
    """
    (1/pi) * integral_a^b h(s) / sqrt((b - s)(s - a)) ds with n Chebyshev nodes.
    `h` is called once with the array of nodes.
    """
    if n < 1:
        raise DomainError("Quadrature order must be positive")
    if a > b:
        raise DomainError(f"Empty interval [{a}, {b}]")
    t = np.cos((2.0 * np.arange(n) + 1.0) * np.pi / (2.0 * n))
    s = 0.5 * (a + b) + 0.5 * (b - a) * t
    values = np.broadcast_to(np.asarray(h(s), dtype=float), s.shape)
    return float(np.mean(values))


@lru_cache(maxsize=32)
def _half_pi_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.25 * np.pi * (t + 1.0), 0.25 * np.pi * w


def _distinct_knots(spectrum, minimum: int = 3) -> tuple[float, ...]:
    a = as_spectrum(spectrum).a
    if len(a) < minimum:
        raise DomainError(f"Need at least {minimum} knots, got {len(a)}")
    if any(a[i] >= a[i + 1] for i in range(len(a) - 1)):
        raise DomainError(f"Knots must be pairwise distinct: {a}")
    return a


@dataclass(frozen=True)
class SingularProductIntegrand:
    """
    g_j(s) = prod_{m=0..2j} (a_{N-m} - s)^(-1/2) * prod_{m=2j+1..N-1} (s - a_{N-m})^(-1/2),
    positive between the knots a_{N-2j-1} < s < a_{N-2j} (1-based), paired with (s - x)^exponent.
    """

    knots: tuple[float, ...]
    j: int
    exponent: float
    _others: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.knots)
        if not 0 <= self.j <= (n - 2) // 2:
            raise DomainError(f"Segment index {self.j} out of range for {n} knots")
        lo, hi = self.bounds
        others = tuple(v for i, v in enumerate(self.knots) if i not in (lo, hi))
        object.__setattr__(self, "_others", others)

    @property
    def bounds(self) -> tuple[int, int]:
        n = len(self.knots)
        return n - 2 - 2 * self.j, n - 1 - 2 * self.j

    @property
    def interval(self) -> tuple[float, float]:
        lo, hi = self.bounds
        return self.knots[lo], self.knots[hi]

    def outer(self, s):
        """
        g_j with the two interval-endpoint factors removed; smooth on the interval.
        """
        s = np.asarray(s, dtype=float)
        if not self._others:
            return np.ones_like(s)
        diff = np.abs(np.subtract.outer(np.array(self._others), s))
        return np.prod(diff, axis=0) ** -0.5

    def outer_at(self, s: float) -> float:
        """
        Scalar `outer` for adaptive quadrature callbacks.
        """
        return math.prod(abs(o - s) for o in self._others) ** -0.5

    def __call__(self, s):
        lo, hi = self.interval
        s = np.asarray(s, dtype=float)
        return self.outer(s) / np.sqrt((hi - s) * (s - lo))

    def weighted(self, s, x: float):
        return self(s) * (np.asarray(s, dtype=float) - x) ** self.exponent


def _quad_alg(fn: Callable[[float], float], lo: float, hi: float, wvar) -> float:
    value, _ = integrate.quad(
        fn, lo, hi, weight="alg", wvar=wvar,
        epsabs=1e-15, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT,
    )
    return value


def _full_integral(
    g: SingularProductIntegrand, x: float, n: int, method: str, near_knot: float
) -> float:
    """
    integral of g(s) (s - x)^p over g's whole interval; x lies below it.
    """
    lo, hi = g.interval
    p = g.exponent
    # for even N, (s - x)^p is a polynomial; otherwise it is nearly singular when x hugs lo
    adaptive = method == "adaptive" or (
        method == "auto" and not float(p).is_integer() and lo - x < near_knot * (hi - lo)
    )
    if adaptive:
        return _quad_alg(lambda s: g.outer_at(s) * (s - x) ** p, lo, hi, (-0.5, -0.5))

    def h(s):
        return g.outer(s) * (s - x) ** p

    return math.pi * gauss_chebyshev(h, lo, hi, n)


def _truncated_integral(
    g: SingularProductIntegrand, x: float, order: int, method: str, near_knot: float
) -> float:
    """
    integral_x^b g(s) (s - x)^p ds with b the top of g's interval and x inside it.
    s = x + (b - x) sin^2(theta) removes both endpoint singularities.
    """
    lo, b = g.interval
    p = g.exponent
    theta, w = _half_pi_legendre(order)
    sin = np.sin(theta)
    s = x + (b - x) * sin**2

    if x == lo:
        # (s - lo)^(-1/2) merges into (s - x)^p
        if 2.0 * p <= -1.0:
            return math.inf
        if method == "adaptive":
            return _quad_alg(g.outer_at, x, b, (p - 0.5, -0.5))
        return 2.0 * (b - x) ** p * float(np.dot(w, sin ** (2.0 * p) * g.outer(s)))

    adaptive = method == "adaptive" or (method == "auto" and x - lo < near_knot * (b - lo))
    if adaptive and x < b:
        return _quad_alg(lambda t: g.outer_at(t) / math.sqrt(t - lo), x, b, (p, -0.5))
    body = sin ** (2.0 * p + 1.0) * g.outer(s) / np.sqrt(s - lo)
    return 2.0 * (b - x) ** (p + 0.5) * float(np.dot(w, body))


def _nearest_knot(a: Sequence[float], x: float) -> tuple[int, float]:
    idx = min(range(len(a)), key=lambda i: abs(a[i] - x))
    return idx, abs(a[idx] - x)


def real_density(
    spectrum,
    x: float,
    n: int = CHEBYSHEV_ORDER,
    *,
    method: str = "auto",
    truncated_order: int | None = None,
    near_knot: float = NEAR_KNOT_FRACTION,
) -> float:
    """
    Real shadow density of a real symmetric matrix with simple spectrum a.

    Full knot intervals above x are integrated with Gauss-Chebyshev; when x sits in
    an "odd" interval the extra integral from x to the interval top uses a sine-squared
    substitution and Gauss-Legendre. With method="auto" an integral whose near-singular
    point sits within `near_knot` of its interval length switches to adaptive
    algebraic-weight quadrature. Valid on the closed hull [a_1, a_N]; at the odd-N
    log-singular knots the value is math.inf.
    """
    if method not in QUADRATURE_METHODS:
        raise DomainError(
            f"Unknown quadrature method '{method}'. Expected one of {QUADRATURE_METHODS}"
        )
    a = _distinct_knots(spectrum)
    big_n = len(a)
    if not a[0] <= x <= a[-1]:
        raise DomainError(f"x={x} outside [{a[0]}, {a[-1]}]")

    span = a[-1] - a[0]
    _, dist = _nearest_knot(a, x)
    if 0.0 < dist < PROXIMITY_WARNING * span:
        logger.warning(f"x={x!r} is within {dist:.3g} of a knot; accuracy may degrade")

    order = truncated_order or max(4 * n, TRUNCATED_MIN_ORDER)
    i = big_n - 2 if x >= a[-1] else bisect_right(a, x) - 1
    d = big_n - 1 - i
    odd = d % 2 == 1
    m_top = (d - 1) // 2 if odd else d // 2
    p = big_n / 2.0 - 2.0

    total = 0.0
    for j in range(m_top):
        g = SingularProductIntegrand(a, j, p)
        total += (-1) ** j * _full_integral(g, x, n, method, near_knot)
    if odd:
        g = SingularProductIntegrand(a, m_top, p)
        part = _truncated_integral(g, x, order, method, near_knot)
        if math.isinf(part):
            return math.inf
        total += (-1) ** m_top * part
    return max((big_n - 2) / (2.0 * math.pi) * total, 0.0)


def hyp2f1(
    a: float,
    b: float,
    c: float,
    z: float,
    tol: float = HYP2F1_TOL,
    max_terms: int = HYP2F1_MAX_TERMS,
) -> float:
    """
    Gauss series 2F1(a, b; c; z). |z| >= 1 is accepted only for terminating series.
    """
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"c={c} is a non-positive integer")
    terminating = any(v <= 0 and float(v).is_integer() for v in (a, b))
    if abs(z) >= 1.0 and not terminating:
        raise ConvergenceError(f"2F1 series diverges at z={z}")

    total = term = 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        ratio = abs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z)
        if ratio < 1.0 and abs(term) * ratio / (1.0 - ratio) < tol:
            return total
    raise ConvergenceError(f"2F1 series did not converge in {max_terms} terms at z={z}")


def agm(a: float, b: float, tol: float = AGM_TOL, max_steps: int = AGM_MAX_STEPS) -> float:
    """
    Arithmetic-geometric mean of two non-negative numbers.
    """
    if a < 0 or b < 0:
        raise DomainError(f"AGM needs non-negative arguments, got {(a, b)}")
    for _ in range(max_steps):
        if abs(a - b) <= tol * max(a, b):
            return 0.5 * (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    raise ConvergenceError(f"AGM did not converge in {max_steps} steps")


def elliptic_E(b1: float, b2: float, b3: float, b4: float, tol: float = ELLIPTIC_TOL) -> float:
    """
    (1/pi) integral_{b3}^{b4} ((b4 - s)(s - b3)(s - b2)(s - b1))^(-1/2) ds.

    This is 2 K(z) / (pi sqrt((b3 - b1)(b4 - b2))) with
    z = (b4 - b3)(b2 - b1) / ((b3 - b1)(b4 - b2)) and 1 - z = (b3 - b2)(b4 - b1) / (same),
    so K = pi / (2 AGM(1, sqrt(1 - z))) gives
    E = 1 / AGM(sqrt((b3 - b1)(b4 - b2)), sqrt((b3 - b2)(b4 - b1))).
    The 2F1 series is a cross-check while z <= ELLIPTIC_CHECK_MAX_Z.
    """
    if not (b1 <= b2 < b3 <= b4):
        raise DomainError(f"Need b1 <= b2 < b3 <= b4, got {(b1, b2, b3, b4)}")
    value = 1.0 / agm(math.sqrt((b3 - b1) * (b4 - b2)), math.sqrt((b3 - b2) * (b4 - b1)))

    z = (b4 - b3) * (b2 - b1) / ((b3 - b1) * (b4 - b2))
    if z > ELLIPTIC_CHECK_MAX_Z:
        return value
    series = ((b3 - b1) * (b4 - b2)) ** -0.5 * hyp2f1(0.5, 0.5, 1.0, z)
    if abs(series - value) > tol * value:
        logger.warning(f"E{(b1, b2, b3, b4)}: AGM {value!r} and 2F1 series {series!r} disagree")
    return value


def real_density_n3(spectrum, x: float) -> float:
    a1, a2, a3 = _distinct_knots(spectrum, minimum=3)[:3]
    if len(as_spectrum(spectrum)) != 3:
        raise DomainError("real_density_n3 needs exactly three knots")
    if not a1 <= x <= a3:
        raise DomainError(f"x={x} outside [{a1}, {a3}]")
    if x == a2:
        return math.inf
    if x > a2:
        return 0.5 * elliptic_E(a1, a2, x, a3)
    return 0.5 * elliptic_E(a1, x, a2, a3)


def plateau_n4(spectrum) -> float:
    """
    Constant value of the N=4 real shadow between the middle knots.
    """
    a = _distinct_knots(spectrum, minimum=4)
    if len(a) != 4:
        raise DomainError("plateau_n4 needs exactly four knots")
    return elliptic_E(a[0], a[1], a[2], a[3])


def middle_knot_n5(spectrum) -> float:
    """
    N=5 real shadow at the middle knot; does not depend on that knot.
    """
    a = _distinct_knots(spectrum, minimum=5)
    if len(a) != 5:
        raise DomainError("middle_knot_n5 needs exactly five knots")
    return 1.5 * elliptic_E(a[0], a[1], a[3], a[4])


def critical_exponents(n: int, k: float) -> tuple[float, ...]:
    return tuple(float(c) for c in range(n - 2)) + ((n - 1) * k - 1.0,)


@dataclass(frozen=True)
class ShadowOdeOperator:
    """
    T_k = sum_{j=0}^{N-1} c_j P_N^(j) d^(N-1-j), c_j = (-1)^j (N-j)/N (N(k-1))_j / j!,
    P_N(x) = prod (x - a_i). The shadow density solves T_k f = 0 between knots.
    """

    knots: tuple[float, ...]
    k: float
    coefficients: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        a = tuple(float(v) for v in as_spectrum(self.knots).a)
        object.__setattr__(self, "knots", a)
        n = len(a)
        coeffs = tuple(
            (-1) ** j * (n - j) / n * pochhammer(n * (self.k - 1.0), j) / math.factorial(j)
            for j in range(n)
        )
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def polynomial(self) -> np.polynomial.Polynomial:
        return np.polynomial.Polynomial.fromroots(self.knots)

    def terms(self, derivatives: Sequence[float], x: float) -> np.ndarray:
        """
        derivatives[m] is f^(m)(x) for m = 0..N-1.
        """
        n = len(self.knots)
        if len(derivatives) != n:
            raise DomainError(f"Need {n} derivatives, got {len(derivatives)}")
        poly = self.polynomial
        out = np.empty(n)
        for j, c in enumerate(self.coefficients):
            out[j] = c * poly.deriv(j)(x) * derivatives[n - 1 - j]
        return out

    def apply(self, derivatives: Sequence[float], x: float) -> float:
        return float(np.sum(self.terms(derivatives, x)))


def _central(f: Density, x: float, m: int, h: float) -> float:
    return sum(
        (-1) ** i * math.comb(m, i) * f(x + (m / 2.0 - i) * h) for i in range(m + 1)
    ) / h**m


def central_derivative(f: Density, x: float, m: int, h: float) -> float:
    """
    Order-m central difference with two Richardson steps (h, h/2, h/4).
    """
    if m == 0:
        return float(f(x))
    d1, d2, d3 = (_central(f, x, m, h / 2**e) for e in range(3))
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def _ode_derivatives(knots, f: Density, x: float, delta: float | None):
    a = as_spectrum(knots).a
    span = a[-1] - a[0]
    delta = 1e-3 * span if delta is None else delta
    dist = min(abs(x - v) for v in a)
    if dist < delta:
        logger.warning(f"x={x!r} is closer than {delta:.3g} to a knot; residual is unreliable")
    n = len(a)
    h = dist / (2.0 * n)
    return [central_derivative(f, x, m, h) for m in range(n)]


def ode_terms(knots, k: float, f: Density, x: float, delta: float | None = None) -> np.ndarray:
    op = ShadowOdeOperator(as_spectrum(knots).a, k)
    return op.terms(_ode_derivatives(op.knots, f, x, delta), x)


def ode_residual(knots, k: float, f: Density, x: float, delta: float | None = None) -> float:
    """
    T_k f(x) with derivatives from finite differences; ~0 for the true density.
    """
    return float(np.sum(ode_terms(knots, k, f, x, delta)))


@dataclass(frozen=True)
class KnotContinuity:
    index: int
    knot: float
    mismatches: tuple[float, ...]
    first_jump: int | None
    expected_jump: int
    log_growth: bool | None = None

    @property
    def continuous_through(self) -> int:
        """
        Highest derivative order found continuous (-1 if even the value jumps).
        """
        top = self.first_jump if self.first_jump is not None else len(self.mismatches)
        return top - 1


def _one_sided(f: Density, knot: float, m: int, h: float) -> float:
    values = [f(knot + (i + 1) * h) for i in range(m + 1)]
    return sum((-1) ** (m - i) * math.comb(m, i) * v for i, v in enumerate(values)) / h**m


def _log_growth(f: Density, knot: float, m: int, gap: float, scale: float) -> bool:
    # A log(d) + B changes by the same amount per decade of d
    v1, v2, v3 = (
        central_derivative(f, knot + frac * gap, m, frac * gap / (m + 2.0))
        for frac in (1e-2, 1e-3, 1e-4)
    )
    step1, step2 = v2 - v1, v3 - v2
    if abs(step1) < 1e-6 * scale or step1 * step2 <= 0:
        return False
    return 0.5 <= step2 / step1 <= 2.0


def knot_continuity_report(
    spectrum, n: int = CHEBYSHEV_ORDER, tol: float = CONTINUITY_TOL
) -> list[KnotContinuity]:
    """
    One-sided finite-difference derivatives of the real shadow at every knot, up to order
    floor(N/2) - 1, compared relative to max|f| / gap^m.
    """
    a = _distinct_knots(spectrum, minimum=4)
    big_n = len(a)
    span = a[-1] - a[0]

    def f(x: float) -> float:
        if x < a[0] or x > a[-1]:
            return 0.0
        return real_density(a, x, n)

    probes = [
        a[i] + frac * (a[i + 1] - a[i]) for i in range(big_n - 1) for frac in (0.25, 0.5, 0.75)
    ]
    fmax = max(f(x) for x in probes)
    max_order = big_n // 2 - 1
    expected = max_order

    reports = []
    for t, knot in enumerate(a):
        gaps = [a[t] - a[t - 1]] if t > 0 else []
        if t < big_n - 1:
            gaps.append(a[t + 1] - a[t])
        gap = min(gaps)
        mismatches = []
        for m in range(max_order + 1):
            h = PROBE_OFFSETS.get(m, PROBE_DEFAULT) * span
            left = _one_sided(f, knot, m, -h)
            right = _one_sided(f, knot, m, h)
            mismatches.append(abs(right - left) / (fmax / gap**m))
        first_jump = next((m for m, v in enumerate(mismatches) if v >= tol), None)
        log_growth = None
        if big_n % 2 == 1 and 0 < t < big_n - 1 and t % 2 == 1:
            log_growth = _log_growth(f, knot, max_order, gap, fmax / gap**max_order)
        reports.append(KnotContinuity(t, knot, tuple(mismatches), first_jump, expected, log_growth))
    return reports


def pushforward_density(
    dist: PushforwardDist,
    n: int = CHEBYSHEV_ORDER,
    *,
    method: str = "auto",
    near_knot: float = NEAR_KNOT_FRACTION,
) -> Density:
    """
    Density evaluator for D(a; k) after collapsing equal knots; zero outside the hull.
    """
    dist = collapse_knots(dist)
    if dist.n == 1:
        raise PointMassError(dist.a[0])
    lo, hi = dist.a[0], dist.a[-1]

    if dist.n == 2:
        def evaluate(x: float) -> float:
            return density_n2(dist, x) if lo <= x <= hi else 0.0
        return evaluate

    if all(abs(k - 0.5) < 1e-12 for k in dist.k):
        spectrum = dist.spectrum

        def evaluate(x: float) -> float:
            if not lo <= x <= hi:
                return 0.0
            return real_density(spectrum, x, n, method=method, near_knot=near_knot)
        return evaluate

    if all(abs(k - round(k)) < 1e-9 for k in dist.k):
        weights = tuple(int(round(k)) for k in dist.k)
        return lambda x: spline_density(dist.spectrum, weights, x)

    raise AnalyticFormUnavailable(
        f"No closed form for knots {dist.a} with weights {dist.k}"
    )


def _real_symmetric_spectrum(matrix) -> np.ndarray:
    a = as_matrix(matrix)
    if not a.real_symmetric:
        raise DomainError("Real shadow density needs a real symmetric matrix")
    return eigenvalues_hermitian(a)


def real_shadow_density(matrix, x: float, n: int = CHEBYSHEV_ORDER) -> float:
    values = _real_symmetric_spectrum(matrix)
    return pushforward_density(PushforwardDist.of(values, 0.5), n)(x)


def real_mixed_shadow_density(matrix, K: int, x: float, n: int = CHEBYSHEV_ORDER) -> float:
    """
    Shadow under real induced mixed states: every eigenvalue carries weight K/2.
    """
    if int(K) != K or K < 1:
        raise DomainError(f"Environment dimension K must be a positive integer, got {K}")
    values = _real_symmetric_spectrum(matrix)
    return pushforward_density(PushforwardDist.of(values, K / 2.0), n)(x)
