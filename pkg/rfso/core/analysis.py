"""
Outage probability and ergodic capacity of the impaired RF/FSO link.

Each quantity has an integral reference (adaptive quadrature over the
first-hop CDF/PDF and the log-irradiance density) and, where one exists, a
Meijer-G closed form. On disagreement the integral form is authoritative.
"""

import logging
import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, special

from rfso.core.errors import (
    CatastrophicCancellation,
    DiscrepancyFlag,
    QuadratureNonConvergent,
    UnsupportedParameters,
)
from rfso.core.fso_hop import (
    gamma2_moment,
    log_irradiance_bounds,
    log_irradiance_breakpoints,
    log_irradiance_density,
)
from rfso.core.link import LinkConfig, gain_constant_C
from rfso.core.rf_hop import rf_cdf, rf_mean, rf_pdf, selection_cancellation, selection_terms
from rfso.core.specfun import MeijerGSpec, delta_params, meijer_g

logger = logging.getLogger(__name__)

# 1 - δγ_th at or below this counts as the feasibility boundary
OUTAGE_MARGIN_FLOOR = 1e-12
OP_QUADRATURE_TOL = 1e-7
EC_QUADRATURE_TOL = 1e-4
CLOSED_FORM_TOL = 1e-5
INTEGER_TOL = 1e-9
MAX_EXPONENT = 700.0
# Meijer G values carry ~1e-11 relative error, amplified by the alternating selection sum
CLOSED_FORM_CANCELLATION_LIMIT = 1e6


class OutageQuery(BaseModel):
    """Outage threshold (linear SNDR) together with the link it applies to."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma_th: float = Field(gt=0.0)
    cfg: LinkConfig

    @property
    def margin(self) -> float:
        """1 - δ·γ_th."""
        return 1.0 - self.cfg.impairments.delta * self.gamma_th

    @property
    def saturated(self) -> bool:
        return self.margin <= OUTAGE_MARGIN_FLOOR

    @property
    def offset(self) -> float:
        """(1+κ₂²)γ_th/(1-δγ_th): the first-hop SNR needed when γ₂ → ∞."""
        return (1.0 + self.cfg.impairments.kappa2 ** 2) * self.gamma_th / self.margin

    @property
    def tau(self) -> float:
        """τ = Cγ_th/(1-δγ_th)."""
        return gain_constant_C(self.cfg) * self.gamma_th / self.margin


def _integer_exponent(cfg: LinkConfig) -> int:
    """β₂k as an integer; the Meijer-G closed forms exist only in that case."""
    exponent = cfg.optical.exponent
    order = round(exponent)
    if order < 1 or abs(exponent - order) > INTEGER_TOL * max(1.0, exponent):
        raise UnsupportedParameters(
            f"closed form needs an integer β₂·k, got {exponent:.12g} "
            f"(β₂={cfg.optical.beta2}, k={cfg.optical.k})"
        )
    return order


def _mellin_block(cfg: LinkConfig) -> Tuple[int, Tuple[float, ...], float, float]:
    """Shared pieces of the closed forms: β₂k, Λ₂, r^(μ-1) and ln[((Ω₁l)^l(Ω₂k)^k r^(k+l))^r]."""
    optical = cfg.optical
    order = _integer_exponent(cfg)
    r = optical.r
    kl = optical.k + optical.l
    lambda0 = optical.lambda0
    lambda2 = tuple(v for x in lambda0 for v in delta_params(r, x)) + delta_params(order, 1.0)
    mu = -sum(lambda0) + kl / 2.0 + 1.0
    log_base = r * (optical.log_scale_product + kl * math.log(r))
    return order, lambda2, r ** (mu - 1.0), log_base


def op_quadrature(q: OutageQuery) -> float:
    """Outage probability by quadrature over ln I of F_γ₁(offset + τ/γ₂).

    Raises:
        QuadratureNonConvergent: error estimate above 1e-7
    """
    if q.saturated:
        return 1.0
    cfg = q.cfg
    offset, tau = q.offset, q.tau
    r, avg_elec = cfg.optical.r, cfg.optical.avg_elec_snr
    lower, upper = log_irradiance_bounds(cfg.optical)

    def integrand(level: float) -> float:
        needed = offset + tau * math.exp(min(-r * level, MAX_EXPONENT)) / avg_elec
        return rf_cdf(needed, cfg.rf) * log_irradiance_density(level, cfg.optical)

    value, error = integrate.quad(
        integrand, lower, upper, epsabs=1e-9, epsrel=1e-9, limit=400,
        points=log_irradiance_breakpoints(cfg.optical) or None,
    )
    if error > OP_QUADRATURE_TOL:
        raise QuadratureNonConvergent(f"outage probability at γ_th={q.gamma_th:.6g}", error)
    return min(max(value, 0.0), 1.0)


def op_closed_form(q: OutageQuery, cross_check: bool = False) -> float:
    """Outage probability as a finite sum of exponentials times Meijer G.

    Each term averages exp(-ξ_n τ/(γ̄₁γ₂)) over γ₂, which collapses to
    G^{0,M}_{M,0}(ζ_n | Λ₂; -) with M = r(k+l) + β₂k.

    Args:
        q: threshold and link
        cross_check: also evaluate op_quadrature and raise on disagreement

    Raises:
        UnsupportedParameters: β₂k is not an integer
        CatastrophicCancellation: the selection weights cancel beyond what the terms resolve
        DiscrepancyFlag: cross_check is set and the two forms differ by more than 1e-5
    """
    if q.saturated:
        return 1.0
    cfg = q.cfg
    cancellation = selection_cancellation(cfg.rf)
    if cancellation > CLOSED_FORM_CANCELLATION_LIMIT:
        raise CatastrophicCancellation(
            f"selection sum for N={cfg.rf.n_relays}, m={cfg.rf.rank} amplifies term errors by "
            f"{cancellation:.3e}; use the quadrature"
        )
    optical = cfg.optical
    order, lambda2, r_power, log_base = _mellin_block(cfg)
    kl = optical.k + optical.l
    prefactor = (
        optical.k * math.sqrt(optical.beta2 * optical.l) * r_power
        / (2.0 * math.pi) ** ((order + optical.r * kl - 3) / 2.0)
    )
    avg_snr = cfg.rf.avg_snr
    log_snr_product = math.log(order * avg_snr * optical.avg_elec_snr)
    offset, tau = q.offset, q.tau

    weights, a, b = selection_terms(cfg.rf)
    terms = []
    for weight, a_n, b_n in zip(weights, a, b):
        xi = b_n / a_n
        log_zeta = log_base + order * (log_snr_product - math.log(tau * xi))
        spec = MeijerGSpec(m=0, n=len(lambda2), a=lambda2, b=(), z=math.exp(log_zeta))
        transform = prefactor * meijer_g(spec)
        terms.append(weight / b_n * math.exp(-xi * offset / avg_snr) * transform)
    value = min(max(1.0 - math.fsum(terms), 0.0), 1.0)

    if cross_check:
        reference = op_quadrature(q)
        if abs(value - reference) > CLOSED_FORM_TOL:
            raise DiscrepancyFlag(f"OP at γ_th={q.gamma_th:.6g}", value, reference, CLOSED_FORM_TOL)
    return value


def jensen_snr(cfg: LinkConfig) -> float:
    """J = E[γ₁γ₂ / ((1+κ₂²)γ₂ + C)] in closed form.

    Raises:
        UnsupportedParameters: β₂k is not an integer
    """
    optical = cfg.optical
    order, lambda2, r_power, log_base = _mellin_block(cfg)
    kappa2_factor = 1.0 + cfg.impairments.kappa2 ** 2
    log_varrho = log_base + order * (math.log(kappa2_factor * optical.avg_elec_snr) - math.log(gain_constant_C(cfg)))
    spec = MeijerGSpec(m=order, n=len(lambda2), a=lambda2, b=delta_params(order, 1.0), z=math.exp(log_varrho))
    kl = optical.k + optical.l
    prefactor = (
        order * math.sqrt(optical.k * optical.l) * r_power * rf_mean(cfg.rf)
        / ((2.0 * math.pi) ** (order + optical.r * kl / 2.0 - 2.0) * kappa2_factor)
    )
    return prefactor * meijer_g(spec)


def jensen_snr_quadrature(cfg: LinkConfig) -> float:
    """J by quadrature: E[γ₁]/(1+κ₂²) · E[γ₂/(γ₂ + C/(1+κ₂²))]."""
    optical = cfg.optical
    kappa2_factor = 1.0 + cfg.impairments.kappa2 ** 2
    log_knee = math.log(gain_constant_C(cfg) / kappa2_factor) - math.log(optical.avg_elec_snr)
    lower, upper = log_irradiance_bounds(optical)

    def integrand(level: float) -> float:
        return special.expit(optical.r * level - log_knee) * log_irradiance_density(level, optical)

    value, error = integrate.quad(
        integrand, lower, upper, epsabs=1e-12, epsrel=1e-10, limit=400,
        points=log_irradiance_breakpoints(optical) or None,
    )
    if error > 1e-9:
        raise QuadratureNonConvergent("Jensen SNR", error)
    return rf_mean(cfg.rf) / kappa2_factor * value


def ec_upper_bound(cfg: LinkConfig) -> float:
    """Jensen upper bound log₂(1 + c·J/(Jδ + 1)) on the ergodic capacity, bps/Hz."""
    j = jensen_snr(cfg)
    return math.log2(1.0 + cfg.c * j / (j * cfg.impairments.delta + 1.0))


def ec_approx(cfg: LinkConfig) -> float:
    """Moment-ratio approximation log₂(1 + c·E[ψ]/E[φ]), bps/Hz."""
    mean1 = rf_mean(cfg.rf)
    mean2 = gamma2_moment(1, cfg.optical)
    signal = mean1 * mean2
    distortion = (
        cfg.impairments.delta * signal
        + (1.0 + cfg.impairments.kappa2 ** 2) * mean2
        + gain_constant_C(cfg)
    )
    return math.log2(1.0 + cfg.c * signal / distortion)


def ec_numeric(cfg: LinkConfig) -> float:
    """Ergodic capacity E[log₂(1 + c·SNDR)] by nested quadrature over γ₁ and ln I.

    Raises:
        QuadratureNonConvergent: outer error estimate above 1e-4 bps/Hz
    """
    c = cfg.c
    delta = cfg.impairments.delta
    kappa2_factor = 1.0 + cfg.impairments.kappa2 ** 2
    gain = gain_constant_C(cfg)
    r, avg_elec = cfg.optical.r, cfg.optical.avg_elec_snr
    knee = 10.0 * rf_mean(cfg.rf)

    def conditional_capacity(level: float) -> float:
        gamma2 = avg_elec * math.exp(min(r * level, MAX_EXPONENT))

        def integrand(gamma1: float) -> float:
            product = gamma1 * gamma2
            ratio = product / (delta * product + kappa2_factor * gamma2 + gain)
            return math.log2(1.0 + c * ratio) * rf_pdf(gamma1, cfg.rf)

        head, _ = integrate.quad(integrand, 0.0, knee, epsabs=1e-10, epsrel=1e-10, limit=200)
        tail, _ = integrate.quad(integrand, knee, math.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
        return head + tail

    lower, upper = log_irradiance_bounds(cfg.optical)
    value, error = integrate.quad(
        lambda level: conditional_capacity(level) * log_irradiance_density(level, cfg.optical),
        lower, upper, epsabs=1e-7, epsrel=1e-8, limit=400,
        points=log_irradiance_breakpoints(cfg.optical) or None,
    )
    if error > EC_QUADRATURE_TOL:
        raise QuadratureNonConvergent("ergodic capacity", error)
    logger.debug(f"ergodic capacity {value:.6f} bps/Hz (error estimate {error:.2e})")
    return value
