"""
Second (optical) hop: Double-Weibull irradiance I = X·Y and the electrical
SNR γ₂ = γ̄_r·I^r it induces under heterodyne (r = 1) or IM/DD (r = 2)
detection.

Closed forms go through the Meijer G-function. Every optical quantity also
has a Meijer-free path that integrates the convolution of the two
log-Weibull densities directly; the tests use it as the reference.
"""

import math
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, optimize, special

from rfso.core.errors import DomainError, NotRationalizable, QuadratureNonConvergent
from rfso.core.specfun import MeijerGSpec, delta_params, meijer_g


RATIONALIZE_TOL = 1e-9
RATIONALIZE_MAX_SUM = 64
SCINTILLATION_EXPONENT = -1.0852
TAIL_PROBABILITY = 1e-14
# log-concave integrands are cut once this many nats below their peak
WINDOW_LOG_DROP = 60.0
MAX_LOG_EXPONENT = 700.0
QUADRATURE_TOL = 1e-9


class Detection(str, Enum):
    """Optical detection technique at the destination."""

    HETERODYNE = "heterodyne"
    IM_DD = "im_dd"

    @property
    def r(self) -> int:
        return 1 if self is Detection.HETERODYNE else 2

    @property
    def c(self) -> float:
        """Capacity constant: 1 for heterodyne, e/(2π) for IM/DD."""
        return 1.0 if self is Detection.HETERODYNE else math.e / (2.0 * math.pi)


def weibull_scale_unit_mean(beta: float) -> float:
    """Scale Ω giving a Weibull(β, Ω) variable unit mean: (1/Γ(1+1/β))^β."""
    if not beta > 0:
        raise DomainError(f"Weibull shape must be positive, got {beta}")
    return math.exp(-beta * special.gammaln(1.0 + 1.0 / beta))


def scintillation_index(beta: float) -> float:
    """Normalized variance Γ(1+2/β)/Γ(1+1/β)² - 1 of a Weibull(β) factor."""
    if not beta > 0:
        raise DomainError(f"Weibull shape must be positive, got {beta}")
    return math.exp(special.gammaln(1.0 + 2.0 / beta) - 2.0 * special.gammaln(1.0 + 1.0 / beta)) - 1.0


def lambda_from_scintillation(sigma2: float) -> float:
    """Shape estimate σ^-1.0852 from a normalized variance σ²."""
    if not sigma2 > 0:
        raise DomainError(f"normalized variance must be positive, got {sigma2}")
    return math.sqrt(sigma2) ** SCINTILLATION_EXPONENT


def rationalize_kl(beta1: float, beta2: float, tol: float = RATIONALIZE_TOL) -> Tuple[int, int]:
    """Smallest positive integers (k, l) with l/k = β₂/β₁ to relative tolerance ``tol``.

    Raises:
        NotRationalizable: no such pair with k + l ≤ 64
    """
    if not (beta1 > 0 and beta2 > 0):
        raise DomainError(f"shape parameters must be positive, got β₁={beta1}, β₂={beta2}")
    ratio = beta2 / beta1
    for denominator in range(1, RATIONALIZE_MAX_SUM):
        fraction = Fraction(ratio).limit_denominator(denominator)
        k, l = fraction.denominator, fraction.numerator
        if l >= 1 and k + l <= RATIONALIZE_MAX_SUM and abs(l / k - ratio) <= tol * ratio:
            return k, l
    raise NotRationalizable(
        f"β₂/β₁ = {ratio:.12g} has no ratio l/k with k + l ≤ {RATIONALIZE_MAX_SUM} within {tol:g}"
    )


class OpticalHopConfig(BaseModel):
    """Double-Weibull turbulence, detection mode and average electrical SNR (linear).

    ``k``/``l`` default to rationalize_kl(beta1, beta2); ``omega1``/``omega2``
    default to the unit-mean scale of their shape.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    beta1: float = Field(gt=0.0)
    beta2: float = Field(gt=0.0)
    k: int = Field(ge=1)
    l: int = Field(ge=1)
    omega1: float = Field(gt=0.0)
    omega2: float = Field(gt=0.0)
    detection: Detection = Detection.HETERODYNE
    avg_elec_snr: float = Field(gt=0.0, description="average electrical SNR γ̄_r, linear")

    @model_validator(mode="before")
    @classmethod
    def _fill_derived(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        beta1, beta2 = data.get("beta1"), data.get("beta2")
        shapes_known = all(isinstance(v, (int, float)) and v > 0 for v in (beta1, beta2))
        if shapes_known and data.get("k") is None and data.get("l") is None:
            data["k"], data["l"] = rationalize_kl(beta1, beta2)
        if isinstance(beta1, (int, float)) and beta1 > 0 and data.get("omega1") is None:
            data["omega1"] = weibull_scale_unit_mean(beta1)
        if isinstance(beta2, (int, float)) and beta2 > 0 and data.get("omega2") is None:
            data["omega2"] = weibull_scale_unit_mean(beta2)
        return data

    @model_validator(mode="after")
    def _exponents_consistent(self) -> "OpticalHopConfig":
        if abs(self.beta1 * self.l - self.beta2 * self.k) > RATIONALIZE_TOL * self.beta2 * self.k:
            raise ValueError(
                f"(k, l) = ({self.k}, {self.l}) violates β₁·l = β₂·k for β₁={self.beta1}, β₂={self.beta2}"
            )
        return self

    @property
    def r(self) -> int:
        return self.detection.r

    @property
    def exponent(self) -> float:
        """β₂k (= β₁l)."""
        return self.beta2 * self.k

    @property
    def log_scale_product(self) -> float:
        """ln[(Ω₁l)^l (Ω₂k)^k]."""
        return self.l * math.log(self.omega1 * self.l) + self.k * math.log(self.omega2 * self.k)

    @property
    def lambda0(self) -> Tuple[float, ...]:
        return delta_params(self.l, 0.0) + delta_params(self.k, 0.0)

    @property
    def lambda1(self) -> Tuple[float, ...]:
        return delta_params(self.l, 1.0) + delta_params(self.k, 1.0)

    @property
    def meijer_norm(self) -> float:
        """√(kl)/(2π)^((k+l)/2 - 1), the Gauss multiplication constant of I's Mellin transform."""
        return math.sqrt(self.k * self.l) / (2.0 * math.pi) ** ((self.k + self.l) / 2.0 - 1.0)


# --- closed forms ---

def irradiance_pdf(irradiance: float, cfg: OpticalHopConfig) -> float:
    """Density of I = X·Y."""
    if not irradiance > 0:
        raise DomainError(f"irradiance must be positive, got {irradiance}")
    z = math.exp(cfg.log_scale_product - cfg.exponent * math.log(irradiance))
    spec = MeijerGSpec(m=0, n=cfg.k + cfg.l, a=cfg.lambda0, b=(), z=z)
    return cfg.exponent * cfg.meijer_norm / irradiance * meijer_g(spec)


def irradiance_cdf(irradiance: float, cfg: OpticalHopConfig) -> float:
    """Distribution function of I = X·Y."""
    if not irradiance > 0:
        raise DomainError(f"irradiance must be positive, got {irradiance}")
    z = math.exp(cfg.beta1 * cfg.l * math.log(irradiance) - cfg.log_scale_product)
    spec = MeijerGSpec(m=cfg.k + cfg.l, n=1, a=(1.0,), b=cfg.lambda1 + (0.0,), z=z)
    return min(max(cfg.meijer_norm * meijer_g(spec), 0.0), 1.0)


def _irradiance_at(snr: float, cfg: OpticalHopConfig) -> float:
    if not snr > 0:
        raise DomainError(f"second-hop SNR must be positive, got {snr}")
    return (snr / cfg.avg_elec_snr) ** (1.0 / cfg.r)


def gamma2_pdf(snr: float, cfg: OpticalHopConfig) -> float:
    """Density of γ₂ = γ̄_r·I^r."""
    irradiance = _irradiance_at(snr, cfg)
    return irradiance_pdf(irradiance, cfg) * irradiance / (cfg.r * snr)


def gamma2_cdf(snr: float, cfg: OpticalHopConfig) -> float:
    """Distribution function of γ₂ = γ̄_r·I^r."""
    return irradiance_cdf(_irradiance_at(snr, cfg), cfg)


def irradiance_moment(order: float, cfg: OpticalHopConfig) -> float:
    """E[I^order] = Ω₁^(n/β₁)Γ(1+n/β₁)·Ω₂^(n/β₂)Γ(1+n/β₂)."""
    if not order > 0:
        raise DomainError(f"moment order must be positive, got {order}")
    log_moment = (
        order / cfg.beta1 * math.log(cfg.omega1) + special.gammaln(1.0 + order / cfg.beta1)
        + order / cfg.beta2 * math.log(cfg.omega2) + special.gammaln(1.0 + order / cfg.beta2)
    )
    return math.exp(log_moment)


def gamma2_moment(order: int, cfg: OpticalHopConfig) -> float:
    """Raw moment E[γ₂^order]."""
    if int(order) != order or order < 1:
        raise DomainError(f"moment order must be a positive integer, got {order}")
    return cfg.avg_elec_snr ** order * irradiance_moment(order * cfg.r, cfg)


# --- sampling ---

def weibull_sample(beta: float, omega: float, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Inverse-transform draws X = (-Ω ln U)^(1/β), U uniform on (0, 1]."""
    uniform = 1.0 - rng.random(shape)
    return (-omega * np.log(uniform)) ** (1.0 / beta)


def irradiance_sample(
    cfg: OpticalHopConfig, rng: np.random.Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """Draw I = X·Y with independent Weibull factors."""
    shape = () if size is None else (int(size),)
    values = weibull_sample(cfg.beta1, cfg.omega1, rng, shape) * weibull_sample(cfg.beta2, cfg.omega2, rng, shape)
    return float(values) if size is None else values


def gamma2_sample(
    cfg: OpticalHopConfig, rng: np.random.Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """Draw γ₂ = γ̄_r·I^r."""
    values = cfg.avg_elec_snr * np.asarray(irradiance_sample(cfg, rng, size)) ** cfg.r
    return float(values) if size is None else values


# --- Meijer-free reference path ---

def _log_weibull_bounds(beta: float, omega: float) -> Tuple[float, float]:
    """Support of ln X outside which each tail holds less than TAIL_PROBABILITY."""
    lower = (math.log(omega) + math.log(TAIL_PROBABILITY)) / beta
    upper = math.log(omega * -math.log(TAIL_PROBABILITY)) / beta
    return lower, upper


def _log_weibull_log_density(u: float, beta: float, omega: float) -> float:
    """ln of the density of ln X for X ~ Weibull(β, Ω)."""
    return math.log(beta / omega) + beta * u - math.exp(min(beta * u, MAX_LOG_EXPONENT)) / omega


def _log_weibull_mode(beta: float, omega: float) -> float:
    return math.log(omega) / beta


def _log_weibull_log_cdf(t: float, beta: float, omega: float) -> float:
    """ln F_X(e^t) for X ~ Weibull(β, Ω)."""
    log_rate = beta * t - math.log(omega)
    if log_rate < -30.0:
        return log_rate
    return math.log(-math.expm1(-math.exp(min(log_rate, MAX_LOG_EXPONENT))))


def _log_concave_integral(log_f: Callable[[float], float], guess: float, scale: float, what: str) -> float:
    """∫ exp(log_f(u)) du over the real line for a log-concave integrand.

    The window grows from the peak until the integrand has dropped by
    WINDOW_LOG_DROP nats on each side, and the integral is taken relative to
    the peak, so far-tail values keep their relative accuracy.
    """
    peak_u = float(optimize.minimize_scalar(lambda u: -log_f(u), bracket=(guess - scale, guess + scale)).x)
    peak = log_f(peak_u)

    def edge(direction: float) -> float:
        step = scale
        for _ in range(64):
            if log_f(peak_u + direction * step) < peak - WINDOW_LOG_DROP:
                break
            step *= 2.0
        return peak_u + direction * step

    value, error = integrate.quad(
        lambda u: math.exp(log_f(u) - peak), edge(-1.0), edge(1.0),
        epsabs=1e-13, epsrel=1e-11, limit=200, points=[peak_u],
    )
    if error > QUADRATURE_TOL * abs(value):
        raise QuadratureNonConvergent(what, error * math.exp(peak))
    return value * math.exp(peak)


def _breakpoints(candidates, lower: float, upper: float) -> Tuple[float, ...]:
    return tuple(sorted(p for p in set(candidates) if lower < p < upper))


def log_irradiance_bounds(cfg: OpticalHopConfig) -> Tuple[float, float]:
    """Effective support of ln I for outer integrals over the irradiance.

    Each factor's tails beyond TAIL_PROBABILITY are dropped, so integrals over
    this range carry an absolute error of that order.
    """
    lo1, hi1 = _log_weibull_bounds(cfg.beta1, cfg.omega1)
    lo2, hi2 = _log_weibull_bounds(cfg.beta2, cfg.omega2)
    return lo1 + lo2, hi1 + hi2


def log_irradiance_breakpoints(cfg: OpticalHopConfig) -> Tuple[float, ...]:
    """Points around the bulk of ln I where an adaptive rule should split its interval."""
    center = _log_weibull_mode(cfg.beta1, cfg.omega1) + _log_weibull_mode(cfg.beta2, cfg.omega2)
    spread = 1.0 / cfg.beta1 + 1.0 / cfg.beta2
    lower, upper = log_irradiance_bounds(cfg)
    return _breakpoints((center + spread * f for f in (-8.0, -3.0, -1.0, 0.0, 1.0)), lower, upper)


@lru_cache(maxsize=65536)
def _log_irradiance_density(beta1: float, beta2: float, omega1: float, omega2: float, level: float) -> float:
    def log_f(u: float) -> float:
        return _log_weibull_log_density(u, beta1, omega1) + _log_weibull_log_density(level - u, beta2, omega2)

    guess = 0.5 * (_log_weibull_mode(beta1, omega1) + level - _log_weibull_mode(beta2, omega2))
    return _log_concave_integral(log_f, guess, 1.0 / beta1 + 1.0 / beta2, f"log-irradiance density at {level:.6g}")


def log_irradiance_density(level: float, cfg: OpticalHopConfig) -> float:
    """Density of ln I at ``level``, by convolution of the two log-Weibull densities."""
    return _log_irradiance_density(cfg.beta1, cfg.beta2, cfg.omega1, cfg.omega2, float(level))


def irradiance_pdf_quadrature(irradiance: float, cfg: OpticalHopConfig) -> float:
    if not irradiance > 0:
        raise DomainError(f"irradiance must be positive, got {irradiance}")
    return log_irradiance_density(math.log(irradiance), cfg) / irradiance


def irradiance_cdf_quadrature(irradiance: float, cfg: OpticalHopConfig) -> float:
    """P(X·Y ≤ I) = E_X[F_Y(I/X)], integrated over ln X."""
    if not irradiance > 0:
        raise DomainError(f"irradiance must be positive, got {irradiance}")
    log_level = math.log(irradiance)

    def log_f(u: float) -> float:
        return _log_weibull_log_density(u, cfg.beta1, cfg.omega1) + _log_weibull_log_cdf(
            log_level - u, cfg.beta2, cfg.omega2
        )

    guess = min(_log_weibull_mode(cfg.beta1, cfg.omega1), log_level - _log_weibull_mode(cfg.beta2, cfg.omega2))
    value = _log_concave_integral(log_f, guess, 1.0 / cfg.beta1 + 1.0 / cfg.beta2, f"irradiance CDF at {irradiance:.6g}")
    return min(max(value, 0.0), 1.0)


def gamma2_pdf_quadrature(snr: float, cfg: OpticalHopConfig) -> float:
    irradiance = _irradiance_at(snr, cfg)
    return irradiance_pdf_quadrature(irradiance, cfg) * irradiance / (cfg.r * snr)


def gamma2_cdf_quadrature(snr: float, cfg: OpticalHopConfig) -> float:
    return irradiance_cdf_quadrature(_irradiance_at(snr, cfg), cfg)
