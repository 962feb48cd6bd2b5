"""
End-to-end composition of the two hops through a fixed-gain AF relay with
impaired transceivers at the source and at the relay.
"""

import math
from typing import Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from rfso.core.errors import InfiniteCeiling
from rfso.core.fso_hop import Detection, OpticalHopConfig
from rfso.core.rf_hop import RfHopConfig, rf_mean


class ImpairmentProfile(BaseModel):
    """Aggregate transceiver impairment levels at the source (κ₁) and the relay (κ₂)."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kappa1: float = Field(default=0.0, ge=0.0)
    kappa2: float = Field(default=0.0, ge=0.0)

    @property
    def delta(self) -> float:
        """δ = κ₁² + κ₂² + κ₁²κ₂²."""
        k1, k2 = self.kappa1 ** 2, self.kappa2 ** 2
        return k1 + k2 + k1 * k2

    @property
    def is_ideal(self) -> bool:
        return self.kappa1 == 0.0 and self.kappa2 == 0.0


class LinkConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rf: RfHopConfig
    optical: OpticalHopConfig
    impairments: ImpairmentProfile = ImpairmentProfile()

    @property
    def c(self) -> float:
        return self.optical.detection.c

    def with_snr(self, avg_snr: Optional[float] = None, avg_elec_snr: Optional[float] = None) -> "LinkConfig":
        """Copy with the average SNR of either hop replaced (linear values)."""
        rf = self.rf if avg_snr is None else RfHopConfig(**{**self.rf.model_dump(), "avg_snr": avg_snr})
        optical = self.optical
        if avg_elec_snr is not None:
            optical = OpticalHopConfig(**{**self.optical.model_dump(), "avg_elec_snr": avg_elec_snr})
        return LinkConfig(rf=rf, optical=optical, impairments=self.impairments)


def detection_constant(detection: Detection) -> float:
    return detection.c


def gain_constant_C(cfg: LinkConfig) -> float:
    """Fixed relay gain constant C = E[γ₁(m)](1 + κ₁²) + 1."""
    return rf_mean(cfg.rf) * (1.0 + cfg.impairments.kappa1 ** 2) + 1.0


def sndr(
    gamma1: ArrayLike, gamma2: ArrayLike, cfg: LinkConfig, C: Optional[float] = None
) -> Union[float, np.ndarray]:
    """End-to-end SNDR γ₁γ₂ / (δγ₁γ₂ + (1+κ₂²)γ₂ + C)."""
    if C is None:
        C = gain_constant_C(cfg)
    gamma1 = np.asarray(gamma1, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    product = gamma1 * gamma2
    values = product / (cfg.impairments.delta * product + (1.0 + cfg.impairments.kappa2 ** 2) * gamma2 + C)
    return float(values) if values.ndim == 0 else values


def sndr_ideal(gamma1: ArrayLike, gamma2: ArrayLike, mean_gamma1: float) -> Union[float, np.ndarray]:
    """Impairment-free end-to-end SNR γ₁γ₂ / (γ₂ + E[γ₁] + 1)."""
    gamma1 = np.asarray(gamma1, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    values = gamma1 * gamma2 / (gamma2 + mean_gamma1 + 1.0)
    return float(values) if values.ndim == 0 else values


def sndr_ceiling(imp: ImpairmentProfile) -> float:
    """High-SNR limit 1/δ of the SNDR."""
    if imp.delta == 0.0:
        raise InfiniteCeiling("ideal hardware: the SNDR grows without bound")
    return 1.0 / imp.delta


def capacity_ceiling(imp: ImpairmentProfile, detection: Detection) -> float:
    """High-SNR limit log₂(1 + c/δ) of the ergodic capacity, bps/Hz."""
    return math.log2(1.0 + detection.c * sndr_ceiling(imp))
