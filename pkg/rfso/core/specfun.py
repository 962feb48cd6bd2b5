"""
Special functions behind the closed-form link statistics.

Gamma-family and Bessel values come from scipy.special. The Meijer
G-function is evaluated for real positive arguments in two ways:

- as a sum of residue series (Slater's theorem), valid when the right pole
  family is simple and the argument lies where the hypergeometric series
  converge;
- by integrating the Mellin-Barnes representation along a vertical line,
  which works whenever the two pole families can be separated.

meijer_g() tries the series first and falls back to the contour.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special

from rfso.core.errors import (
    ContourNotSeparable,
    DomainError,
    NonConvergent,
    PoleCoincidence,
    SeriesLossOfPrecision,
)

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-9

SERIES_RELATIVE_TOL = 1e-16
SERIES_QUIET_TERMS = 30
SERIES_MAX_TERMS = 10_000
SERIES_MAX_CANCELLATION = 1e5
# pFq with p == q+1 converges inside the unit disc only; stay well inside it
SERIES_UNIT_DISC_LIMIT = 0.5

CONTOUR_RELATIVE_TOL = 1e-8
CONTOUR_ABSOLUTE_TOL = 1e-12
CONTOUR_LOG_TRUNCATION = math.log(1e-16)
CONTOUR_MAX_EXTENSIONS = 200
CONTOUR_MAX_SPAN = 1e6


# --- gamma family and Bessel ---

def ln_gamma(x: float) -> float:
    """ln Γ(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def gamma(x: float) -> float:
    """Real gamma function. Non-positive integers are poles and raise DomainError."""
    if x <= 0 and float(x).is_integer():
        raise DomainError(f"gamma has a pole at {x}")
    if x > 0:
        return float(special.gamma(x))
    # reflection for negative non-integers
    return math.pi / (math.sin(math.pi * x) * float(special.gamma(1.0 - x)))


def bessel_j0(x: float) -> float:
    """Bessel function of the first kind, order zero."""
    return float(special.j0(x))


def delta_params(j: int, x: float) -> Tuple[float, ...]:
    """Δ(j; x) = (x/j, (x+1)/j, ..., (x+j-1)/j)."""
    if j < 1:
        raise DomainError(f"Δ(j; x) needs a positive integer j, got {j}")
    return tuple((x + i) / j for i in range(j))


# --- Meijer G parameter blocks ---

@dataclass(frozen=True)
class MeijerGSpec:
    """Parameters of G^{m,n}_{p,q}(z | a; b) with real parameters and z > 0.

    The first n entries of ``a`` enter as Γ(1 - a_j + s), the first m entries
    of ``b`` as Γ(b_j - s); the rest sit in the denominator.
    """

    m: int
    n: int
    a: Tuple[float, ...]
    b: Tuple[float, ...]
    z: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "z", float(self.z))
        if not 0 <= self.m <= self.q:
            raise DomainError(f"m={self.m} outside [0, q={self.q}]")
        if not 0 <= self.n <= self.p:
            raise DomainError(f"n={self.n} outside [0, p={self.p}]")
        if not (self.z > 0 and math.isfinite(self.z)):
            raise DomainError(f"Meijer G argument must be finite and positive, got {self.z}")

    @property
    def p(self) -> int:
        return len(self.a)

    @property
    def q(self) -> int:
        return len(self.b)

    def inverted(self) -> "MeijerGSpec":
        """G^{m,n}_{p,q}(z | a; b) = G^{n,m}_{q,p}(1/z | 1-b; 1-a)."""
        return MeijerGSpec(
            m=self.n,
            n=self.m,
            a=tuple(1.0 - v for v in self.b),
            b=tuple(1.0 - v for v in self.a),
            z=1.0 / self.z,
        )

    def __str__(self) -> str:
        a = ", ".join(f"{v:.6g}" for v in self.a) or "-"
        b = ", ".join(f"{v:.6g}" for v in self.b) or "-"
        return f"G^{{{self.m},{self.n}}}_{{{self.p},{self.q}}}({self.z:.6g} | {a}; {b})"


@dataclass(frozen=True)
class PoleStructure:
    """Sorted pole positions of one gamma-product family with their multiplicities."""

    pole_locations: Tuple[float, ...]
    multiplicities: Tuple[int, ...]

    @property
    def is_simple(self) -> bool:
        return all(count == 1 for count in self.multiplicities)

    @classmethod
    def from_poles(cls, poles: Sequence[float], tolerance: float = POLE_TOLERANCE) -> "PoleStructure":
        locations: List[float] = []
        counts: List[int] = []
        for pole in sorted(poles):
            if locations and abs(pole - locations[-1]) <= tolerance:
                counts[-1] += 1
            else:
                locations.append(pole)
                counts.append(1)
        return cls(tuple(locations), tuple(counts))


def pole_structure(spec: MeijerGSpec, family: str = "right") -> PoleStructure:
    """Poles of Γ(b_j - s), j < m ("right") or of Γ(1 - a_j + s), j < n ("left").

    Only a window of the infinite pole ladders is listed; it is deep enough
    to expose every coincidence, since two ladders meet iff their bases
    differ by an integer.
    """
    if family == "right":
        bases, offset, step = spec.b[:spec.m], 0.0, 1.0
    elif family == "left":
        bases, offset, step = spec.a[:spec.n], -1.0, -1.0
    else:
        raise ValueError(f"unknown pole family '{family}'")
    if not bases:
        return PoleStructure((), ())
    depth = math.ceil(max(bases) - min(bases)) + 2
    poles = [base + offset + step * k for base in bases for k in range(depth)]
    return PoleStructure.from_poles(poles)


def _pole_gap(spec: MeijerGSpec) -> Tuple[float, float]:
    left = max(spec.a[:spec.n]) - 1.0 if spec.n else -math.inf
    right = min(spec.b[:spec.m]) if spec.m else math.inf
    return left, right


def _require_separable(spec: MeijerGSpec) -> Tuple[float, float]:
    left, right = _pole_gap(spec)
    if left >= right - POLE_TOLERANCE:
        raise ContourNotSeparable(
            f"{spec}: left poles reach {left:.6g} and right poles start at {right:.6g}"
        )
    return left, right


# --- hypergeometric series ---

def _hyper_series(upper: Sequence[float], lower: Sequence[float], x: float) -> Tuple[float, float]:
    """Sum of pFq(upper; lower; x) and the largest term magnitude met on the way."""
    term = 1.0
    total = 1.0
    peak = 1.0
    quiet = 0
    for k in range(SERIES_MAX_TERMS):
        ratio = x / (k + 1.0)
        for u in upper:
            ratio *= u + k
        for d in lower:
            ratio /= d + k
        term *= ratio
        total += term
        if not math.isfinite(total):
            raise NonConvergent(f"hypergeometric series overflowed at term {k + 1} (x={x:.6g})")
        peak = max(peak, abs(term))
        if term == 0.0:
            return total, peak
        if abs(term) < SERIES_RELATIVE_TOL * abs(total):
            quiet += 1
            if quiet >= SERIES_QUIET_TERMS:
                return total, peak
        else:
            quiet = 0
    raise NonConvergent(f"hypergeometric series did not settle within {SERIES_MAX_TERMS} terms (x={x:.6g})")


def hyper_pfq(upper: Sequence[float], lower: Sequence[float], x: float) -> float:
    """Generalized hypergeometric function pFq by direct summation.

    Args:
        upper: numerator parameters a_1..a_p
        lower: denominator parameters b_1..b_q, none a non-positive integer
        x: argument; for p == q+1 it must lie inside the unit disc

    Returns:
        float: the series value
    """
    for d in lower:
        if d <= 0 and float(d).is_integer():
            raise DomainError(f"denominator parameter {d} is a non-positive integer")
    return _hyper_series(upper, lower, x)[0]


def _is_nonpositive_integer(value: float) -> bool:
    return value <= POLE_TOLERANCE and abs(value - round(value)) <= POLE_TOLERANCE


def meijer_g_series(spec: MeijerGSpec) -> float:
    """Meijer G as a sum of residue series over the right pole family.

    Specs with p > q, or p == q and z > 1, are mapped through the
    argument-inversion identity first.

    Raises:
        ContourNotSeparable: the pole families interleave
        PoleCoincidence: poles of the residue sum are not simple
        SeriesLossOfPrecision: the partial sums cancel beyond the trusted ratio
        NonConvergent: a hypergeometric series did not settle
    """
    _require_separable(spec)
    work = spec
    if spec.p > spec.q or (spec.p == spec.q and spec.z > 1.0):
        work = spec.inverted()
    if work.m == 0:
        # no poles to the right of the contour
        return 0.0
    if work.p == work.q and work.z > SERIES_UNIT_DISC_LIMIT:
        raise SeriesLossOfPrecision(f"{spec}: argument too close to the unit circle for the series")

    structure = pole_structure(work, "right")
    if not structure.is_simple:
        raise PoleCoincidence(f"{spec}: right poles have multiplicities {max(structure.multiplicities)}")

    m, n = work.m, work.n
    b_right, b_rest = work.b[:m], work.b[m:]
    a_left, a_rest = work.a[:n], work.a[n:]
    x = -work.z if (work.p - m - n) % 2 else work.z

    contributions = []
    magnitudes = []
    for h, bh in enumerate(b_right):
        lower = [1.0 + bh - bj for j, bj in enumerate(work.b) if j != h]
        if any(_is_nonpositive_integer(d) for d in lower):
            raise PoleCoincidence(f"{spec}: residue at {bh:.6g} meets a degenerate lower parameter")
        upper = [1.0 + bh - aj for aj in work.a]

        coefficient = 1.0
        for j, bj in enumerate(b_right):
            if j != h:
                coefficient *= special.gamma(bj - bh)
        for aj in a_left:
            coefficient *= special.gamma(1.0 + bh - aj)
        for bj in b_rest:
            coefficient *= special.rgamma(1.0 + bh - bj)
        for aj in a_rest:
            coefficient *= special.rgamma(aj - bh)
        scale = coefficient * work.z ** bh

        value, peak = _hyper_series(upper, lower, x)
        contributions.append(scale * value)
        magnitudes.append(abs(scale) * peak)

    total = math.fsum(contributions)
    if not math.isfinite(total):
        raise NonConvergent(f"{spec}: residue sum is not finite")
    largest = max(magnitudes)
    if largest > 0 and (total == 0.0 or largest > SERIES_MAX_CANCELLATION * abs(total)):
        raise SeriesLossOfPrecision(
            f"{spec}: terms of size {largest:.3e} cancel down to {total:.3e}"
        )
    return total


# --- Mellin-Barnes contour ---

def _log_integrand(spec: MeijerGSpec, s):
    """Logarithm of the Mellin-Barnes integrand at complex s (scalar or array)."""
    acc = s * math.log(spec.z)
    for bj in spec.b[:spec.m]:
        acc = acc + special.loggamma(bj - s)
    for aj in spec.a[:spec.n]:
        acc = acc + special.loggamma(1.0 - aj + s)
    for bj in spec.b[spec.m:]:
        acc = acc - special.loggamma(1.0 - bj + s)
    for aj in spec.a[spec.n:]:
        acc = acc - special.loggamma(aj - s)
    # a denominator pole on the line makes the integrand vanish there
    return np.where(np.isfinite(acc), acc, -np.inf + 0j)


def _saddle_abscissa(spec: MeijerGSpec, left: float, right: float) -> float:
    """Real-axis minimum of the integrand modulus when only one pole family exists."""
    log_z = math.log(spec.z)
    span = min(8.0 + 4.0 * math.exp(abs(log_z) / max(1, spec.m + spec.n)), CONTOUR_MAX_SPAN)
    if math.isinf(left):
        lower, upper = right - span, right
    else:
        lower, upper = left, left + span

    def log_modulus(sigma: float) -> float:
        value = sigma * log_z
        for bj in spec.b[:spec.m]:
            value += special.gammaln(bj - sigma)
        for aj in spec.a[:spec.n]:
            value += special.gammaln(1.0 - aj + sigma)
        return float(value)

    result = optimize.minimize_scalar(
        log_modulus, bounds=(lower, upper), method="bounded", options={"xatol": 1e-6}
    )
    return float(result.x)


def _truncation_height(log_modulus, peak: float) -> Tuple[float, float]:
    """Height beyond which the integrand stays below CONTOUR_LOG_TRUNCATION relative to its peak."""
    height = 8.0
    peak = max(peak, float(np.max(log_modulus(np.linspace(0.0, height, 81)))))
    for _ in range(CONTOUR_MAX_EXTENSIONS):
        tail = log_modulus(np.linspace(height, 1.5 * height, 33))
        peak = max(peak, float(np.max(tail)))
        if np.max(tail) < peak + CONTOUR_LOG_TRUNCATION and tail[-1] <= tail[0]:
            return height, peak
        height *= 1.5
    raise NonConvergent(f"integrand does not decay along the contour (height {height:.3g})")


def meijer_g_contour(spec: MeijerGSpec) -> float:
    """Meijer G by quadrature of its Mellin-Barnes integral on Re s = σ.

    σ is the midpoint of the gap between the pole families, or the saddle
    point of the integrand modulus when one family is empty. Only the upper
    half line is integrated; the lower half is its complex conjugate.

    Raises:
        ContourNotSeparable: the pole families interleave
        NonConvergent: the integrand does not decay or quadrature misses tolerance
    """
    left, right = _require_separable(spec)
    if spec.m == 0 and spec.n == 0:
        return 0.0
    if math.isinf(left) or math.isinf(right):
        sigma = _saddle_abscissa(spec, left, right)
    else:
        sigma = 0.5 * (left + right)

    def log_modulus(t: np.ndarray) -> np.ndarray:
        return np.real(_log_integrand(spec, sigma + 1j * t))

    height, peak = _truncation_height(log_modulus, float(log_modulus(np.zeros(1))[0]))

    def integrand(t: float) -> float:
        return float(np.real(np.exp(_log_integrand(spec, sigma + 1j * t) - peak)))

    value, error = integrate.quad(integrand, 0.0, height, limit=500, epsabs=1e-14, epsrel=1e-11)
    if error > max(CONTOUR_RELATIVE_TOL * abs(value), CONTOUR_ABSOLUTE_TOL):
        raise NonConvergent(
            f"{spec}: contour quadrature error {error:.3e} against value {value:.3e} (scaled)"
        )
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"{spec}: contour at sigma={sigma:.6g}, height {height:.3g}, log peak {peak:.3f}")
    return float(np.exp(peak)) * value / math.pi


def meijer_g(spec: MeijerGSpec) -> float:
    """Meijer G for real positive arguments: residue series, contour as fallback."""
    try:
        return meijer_g_series(spec)
    except (PoleCoincidence, SeriesLossOfPrecision, NonConvergent) as exc:
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"series rejected ({exc.__class__.__name__}: {exc}); using the contour")
        return meijer_g_contour(spec)
