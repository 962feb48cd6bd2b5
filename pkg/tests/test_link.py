"""
Tests for rfso.core.link
"""

import math
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, PROJECT_ROOT)

from rfso.core.errors import InfiniteCeiling
from rfso.core.fso_hop import Detection, OpticalHopConfig
from rfso.core.link import (
    ImpairmentProfile,
    LinkConfig,
    capacity_ceiling,
    detection_constant,
    gain_constant_C,
    sndr,
    sndr_ceiling,
    sndr_ideal,
)
from rfso.core.rf_hop import RfHopConfig, rf_mean


def _link(n_relays=1, rank=1, rho=1.0, avg_snr=1.0, kappa1=0.0, kappa2=0.0, detection=Detection.HETERODYNE):
    return LinkConfig(
        rf=RfHopConfig(n_relays=n_relays, rank=rank, rho=rho, avg_snr=avg_snr),
        optical=OpticalHopConfig(beta1=1.0, beta2=1.0, detection=detection, avg_elec_snr=avg_snr),
        impairments=ImpairmentProfile(kappa1=kappa1, kappa2=kappa2),
    )


def test_impairment_profile():
    """δ aggregates both impairment levels and vanishes only for ideal hardware"""
    assert ImpairmentProfile(kappa1=0.2, kappa2=0.2).delta == pytest.approx(0.0816, rel=1e-12)
    assert ImpairmentProfile().delta == 0.0
    assert ImpairmentProfile().is_ideal
    assert not ImpairmentProfile(kappa1=0.0, kappa2=0.1).is_ideal
    with pytest.raises(ValidationError):
        ImpairmentProfile(kappa1=-0.1)


def test_gain_constant():
    """C = E[γ₁(m)](1+κ₁²) + 1"""
    assert gain_constant_C(_link()) == pytest.approx(2.0, rel=1e-14)
    assert gain_constant_C(_link(n_relays=2, rank=2, rho=1.0, kappa1=0.2)) == pytest.approx(2.56, rel=1e-12)
    cfg = _link(n_relays=4, rank=3, rho=0.6, avg_snr=7.0)
    assert gain_constant_C(cfg) == pytest.approx(rf_mean(cfg.rf) + 1.0, rel=1e-14)


def test_sndr_examples():
    """Direct arithmetic, the ideal reduction and the high-SNR limit"""
    cfg = _link(kappa1=0.1, kappa2=0.1)
    assert sndr(10.0, 10.0, cfg, C=2.0) == pytest.approx(100.0 / 14.11, rel=1e-12)
    assert sndr(10.0, 10.0, cfg, C=2.0) == pytest.approx(7.0872, abs=1e-4)

    impaired = _link(kappa1=0.2, kappa2=0.2)
    assert sndr(1e9, 1e9, impaired) == pytest.approx(12.2549, abs=1e-4)

    ideal = _link(n_relays=3, rank=2, rho=0.7, avg_snr=5.0)
    rng = np.random.default_rng(1)
    gamma1, gamma2 = rng.exponential(5.0, 1000), rng.exponential(5.0, 1000)
    np.testing.assert_allclose(sndr(gamma1, gamma2, ideal), sndr_ideal(gamma1, gamma2, rf_mean(ideal.rf)), rtol=1e-14)
    assert isinstance(sndr(1.0, 1.0, ideal), float)


def test_sndr_monotone_and_bounded():
    """SNDR grows in both hop SNRs and stays below 1/δ"""
    cfg = _link(n_relays=3, rank=3, rho=0.9, avg_snr=10.0, kappa1=0.15, kappa2=0.3)
    rng = np.random.default_rng(2)
    grid = np.sort(rng.exponential(50.0, 200))
    fixed = rng.exponential(50.0, 20)
    for other in fixed:
        assert np.all(np.diff(sndr(grid, other, cfg)) >= 0.0), "nondecreasing in γ₁"
        assert np.all(np.diff(sndr(other, grid, cfg)) >= 0.0), "nondecreasing in γ₂"

    draws = sndr(rng.exponential(1e4, 100_000), rng.exponential(1e4, 100_000), cfg)
    assert np.all(draws < sndr_ceiling(cfg.impairments)), "SNDR must stay below the ceiling"


def test_ceilings():
    """1/δ and log₂(1 + c/δ), with no ceiling for ideal hardware"""
    mild = ImpairmentProfile(kappa1=0.2, kappa2=0.2)
    severe = ImpairmentProfile(kappa1=0.4, kappa2=0.4)
    assert sndr_ceiling(mild) == pytest.approx(12.2549, abs=1e-4)
    assert 10.0 * math.log10(sndr_ceiling(mild)) == pytest.approx(10.88, abs=5e-3)
    assert sndr_ceiling(severe) == pytest.approx(2.8935, abs=1e-4)
    assert 10.0 * math.log10(sndr_ceiling(severe)) == pytest.approx(4.61, abs=5e-3)
    with pytest.raises(InfiniteCeiling):
        sndr_ceiling(ImpairmentProfile())
    with pytest.raises(InfiniteCeiling):
        capacity_ceiling(ImpairmentProfile(), Detection.HETERODYNE)

    assert capacity_ceiling(mild, Detection.HETERODYNE) == pytest.approx(3.7285, abs=1e-4)
    c = math.e / (2.0 * math.pi)
    assert capacity_ceiling(mild, Detection.IM_DD) == pytest.approx(math.log2(1.0 + c / mild.delta), rel=1e-14)
    assert capacity_ceiling(mild, Detection.IM_DD) == pytest.approx(2.6558, abs=1e-4)
    for kappa in (0.05, 0.2, 0.5, 1.0):
        imp = ImpairmentProfile(kappa1=kappa, kappa2=kappa)
        assert capacity_ceiling(imp, Detection.HETERODYNE) > capacity_ceiling(imp, Detection.IM_DD)


def test_link_config_helpers():
    """Detection constant and SNR replacement"""
    cfg = _link(detection=Detection.IM_DD, avg_snr=3.0)
    assert cfg.c == detection_constant(Detection.IM_DD) == pytest.approx(0.4326279, abs=1e-7)
    moved = cfg.with_snr(avg_snr=100.0, avg_elec_snr=200.0)
    assert moved.rf.avg_snr == 100.0 and moved.optical.avg_elec_snr == 200.0
    assert moved.impairments == cfg.impairments
    assert cfg.rf.avg_snr == 3.0, "original config is unchanged"


if __name__ == "__main__":
    test_impairment_profile()
    test_gain_constant()
    test_sndr_examples()
    test_sndr_monotone_and_bounded()
    test_ceilings()
    test_link_config_helpers()
    print("All link tests passed")
