"""
First (RF) hop: Rayleigh fading with partial relay selection on outdated CSI.

The source ranks the N relays by their outdated first-hop gains and picks
the rank-m relay (increasing order, so m = N is the best). By the time data
flows the channel has decorrelated to h = √ρ·h̃ + √(1-ρ)·w, which makes the
selected SNR a finite mixture of exponentials.
"""

import math
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import mpmath
import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import comb

from rfso.core.errors import DomainError, NegativeCorrelation
from rfso.core.specfun import bessel_j0

# J₀ evaluated at its first root can land a hair below zero
NEGATIVE_CORRELATION_SLACK = 1e-6
# past this amplification the mixture sums are done in mpmath
FLOAT_CANCELLATION_LIMIT = 1e4
EXTENDED_GUARD_DIGITS = 20


class RfHopConfig(BaseModel):
    """Relay population, selected rank, CSI correlation and average first-hop SNR (linear)."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    n_relays: int = Field(ge=1, description="relay count N")
    rank: int = Field(ge=1, description="selected rank m, 1..N")
    rho: float = Field(ge=0.0, le=1.0, description="time correlation between CSI and data channels")
    avg_snr: float = Field(gt=0.0, description="average first-hop SNR, linear")

    @model_validator(mode="after")
    def _rank_within_population(self) -> "RfHopConfig":
        if self.rank > self.n_relays:
            raise ValueError(f"rank m={self.rank} exceeds relay count N={self.n_relays}")
        return self


def jakes_rho(doppler_hz: float, delay_s: float) -> float:
    """Correlation ρ = J₀(2π·f_d·T_d) between the selection-time and data-time channels.

    Raises:
        NegativeCorrelation: the product f_d·T_d is past the first root of J₀
    """
    if doppler_hz < 0 or delay_s < 0:
        raise DomainError(f"Doppler ({doppler_hz}) and feedback delay ({delay_s}) must be non-negative")
    rho = bessel_j0(2.0 * math.pi * doppler_hz * delay_s)
    if rho < -NEGATIVE_CORRELATION_SLACK:
        raise NegativeCorrelation(
            f"J0(2π·{doppler_hz}·{delay_s}) = {rho:.6g} is negative; outdated-CSI model needs ρ ≥ 0"
        )
    return min(max(rho, 0.0), 1.0)


@lru_cache(maxsize=256)
def _selection_terms(n_relays: int, rank: int, rho: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mixture weights m·C(N,m)·C(m-1,n)·(-1)^n and the a_n, b_n factors for n = 0..m-1."""
    n = np.arange(rank)
    weights = np.array([float(w) for w in _exact_weights(n_relays, rank)])
    a = (n_relays - rank + n) * (1.0 - rho) + 1.0
    b = (n_relays - rank + n + 1).astype(float)
    for array in (weights, a, b):
        array.setflags(write=False)
    return weights, a, b


@lru_cache(maxsize=256)
def _exact_weights(n_relays: int, rank: int) -> Tuple[int, ...]:
    return tuple(
        rank * comb(n_relays, rank, exact=True) * comb(rank - 1, k, exact=True) * (-1) ** k for k in range(rank)
    )


def selection_terms(cfg: RfHopConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(weights, a_n, b_n) of the selected-SNR mixture; shared with the outage closed form."""
    return _selection_terms(cfg.n_relays, cfg.rank, cfg.rho)


def selection_cancellation(cfg: RfHopConfig) -> float:
    """Σ|w_n|/b_n: how far the alternating mixture sums exceed their O(1) result.

    The survival function at zero is Σw_n/b_n = 1, so this ratio is the
    factor by which rounding errors in the terms are amplified.
    """
    weights, _, b = selection_terms(cfg)
    return float(np.sum(np.abs(weights) / b))


def _mp_terms(cfg: RfHopConfig) -> List[Tuple[mpmath.mpf, mpmath.mpf, mpmath.mpf]]:
    """(w_n, a_n, b_n) at the current mpmath precision."""
    rho = mpmath.mpf(cfg.rho)
    base = cfg.n_relays - cfg.rank
    return [
        (mpmath.mpf(w), (base + k) * (1 - rho) + 1, mpmath.mpf(base + k + 1))
        for k, w in enumerate(_exact_weights(cfg.n_relays, cfg.rank))
    ]


def _working_digits(cfg: RfHopConfig) -> int:
    return EXTENDED_GUARD_DIGITS + math.ceil(math.log10(selection_cancellation(cfg)))


def _needs_extended(cfg: RfHopConfig) -> bool:
    return selection_cancellation(cfg) > FLOAT_CANCELLATION_LIMIT


def _extended_pdf_cdf(x: np.ndarray, cfg: RfHopConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Density and distribution function summed in mpmath for heavily cancelling mixtures."""
    pdf = np.empty(x.shape)
    cdf = np.empty(x.shape)
    with mpmath.workdps(_working_digits(cfg)):
        avg = mpmath.mpf(cfg.avg_snr)
        terms = _mp_terms(cfg)
        for index, value in np.ndenumerate(np.maximum(x, 0.0)):
            v = mpmath.mpf(float(value))
            decays = [mpmath.exp(-v * b / (a * avg)) for _, a, b in terms]
            pdf[index] = float(mpmath.fsum(w / (a * avg) * e for (w, a, _), e in zip(terms, decays)))
            cdf[index] = float(1 - mpmath.fsum(w / b * e for (w, _, b), e in zip(terms, decays)))
    return pdf, cdf


def _scalar_or_array(values: np.ndarray) -> Union[float, np.ndarray]:
    return float(values) if values.ndim == 0 else values


def rf_pdf(x: ArrayLike, cfg: RfHopConfig) -> Union[float, np.ndarray]:
    """Density of the selected relay's first-hop SNR."""
    x = np.asarray(x, dtype=float)
    if _needs_extended(cfg):
        values = np.maximum(_extended_pdf_cdf(x, cfg)[0], 0.0)
    else:
        weights, a, b = selection_terms(cfg)
        scale = a * cfg.avg_snr
        values = np.sum(weights / scale * np.exp(-np.multiply.outer(np.maximum(x, 0.0), b / scale)), axis=-1)
    return _scalar_or_array(np.where(x < 0, 0.0, values))


def rf_cdf(x: ArrayLike, cfg: RfHopConfig) -> Union[float, np.ndarray]:
    """Distribution function of the selected relay's first-hop SNR."""
    x = np.asarray(x, dtype=float)
    if _needs_extended(cfg):
        values = np.clip(_extended_pdf_cdf(x, cfg)[1], 0.0, 1.0)
    else:
        weights, a, b = selection_terms(cfg)
        rates = b / (a * cfg.avg_snr)
        survival = np.sum(weights / b * np.exp(-np.multiply.outer(np.maximum(x, 0.0), rates)), axis=-1)
        values = np.clip(1.0 - survival, 0.0, 1.0)
    return _scalar_or_array(np.where(x <= 0, 0.0, values))


def rf_mean(cfg: RfHopConfig) -> float:
    """E[γ₁(m)]."""
    if _needs_extended(cfg):
        with mpmath.workdps(_working_digits(cfg)):
            return float(mpmath.fsum(w * a / b ** 2 for w, a, b in _mp_terms(cfg)) * mpmath.mpf(cfg.avg_snr))
    weights, a, b = selection_terms(cfg)
    return float(np.sum(weights * a / b ** 2)) * cfg.avg_snr


def rf_sample(
    cfg: RfHopConfig, rng: np.random.Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """Draw the selected relay's first-hop SNR.

    Each draw sorts N unit-variance complex Gaussian outdated gains, keeps the
    rank-m one and decorrelates it with fresh Gaussian noise.

    Args:
        cfg: first-hop configuration
        rng: caller-owned random stream
        size: number of draws, or None for a single float

    Returns:
        float or np.ndarray: realized γ₁(m) values
    """
    shape = () if size is None else (int(size),)
    outdated = (
        rng.standard_normal(shape + (cfg.n_relays,)) + 1j * rng.standard_normal(shape + (cfg.n_relays,))
    ) / math.sqrt(2.0)
    order = np.argsort(np.abs(outdated) ** 2, axis=-1, kind="stable")
    selected = np.take_along_axis(outdated, order[..., cfg.rank - 1:cfg.rank], axis=-1)[..., 0]
    innovation = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    current = math.sqrt(cfg.rho) * selected + math.sqrt(1.0 - cfg.rho) * innovation
    return _scalar_or_array(np.abs(current) ** 2 * cfg.avg_snr)
