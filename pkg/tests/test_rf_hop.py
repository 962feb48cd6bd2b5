"""
Tests for rfso.core.rf_hop
"""

import math
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate, special, stats

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, PROJECT_ROOT)

from rfso.core.errors import DomainError, NegativeCorrelation
from rfso.core.rf_hop import (
    FLOAT_CANCELLATION_LIMIT,
    RfHopConfig,
    jakes_rho,
    rf_cdf,
    rf_mean,
    rf_pdf,
    rf_sample,
    selection_cancellation,
)


def _order_statistic_cdf(x: float, n_relays: int, rank: int, avg_snr: float) -> float:
    """CDF of the rank-th smallest of n_relays iid exponentials."""
    p = -math.expm1(-x / avg_snr)
    return sum(
        special.comb(n_relays, j, exact=True) * p ** j * (1.0 - p) ** (n_relays - j)
        for j in range(rank, n_relays + 1)
    )


def test_config_rejects_rank_above_population():
    """rank must lie in 1..N and ρ in [0, 1]"""
    with pytest.raises(ValidationError):
        RfHopConfig(n_relays=2, rank=3, rho=0.5, avg_snr=1.0)
    with pytest.raises(ValidationError):
        RfHopConfig(n_relays=2, rank=1, rho=1.2, avg_snr=1.0)
    with pytest.raises(ValidationError):
        RfHopConfig(n_relays=2, rank=1, rho=0.5, avg_snr=0.0)


def test_jakes_rho():
    """ρ = J0(2π f_d T_d) with a hard error past the first root"""
    assert jakes_rho(0.0, 5.0) == 1.0
    assert jakes_rho(1.0 / (2.0 * math.pi), 1.0) == pytest.approx(0.7651977, abs=1e-7)
    assert jakes_rho(2.404826 / (2.0 * math.pi), 1.0) == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(NegativeCorrelation):
        jakes_rho(3.0 / (2.0 * math.pi), 1.0)
    with pytest.raises(DomainError):
        jakes_rho(-1.0, 1.0)


def test_rf_pdf_examples():
    """Single relay is exponential; 2nd-of-3 density vanishes at the origin"""
    single = RfHopConfig(n_relays=1, rank=1, rho=0.3, avg_snr=1.0)
    for x in (0.0, 0.5, 2.0, 7.0):
        assert rf_pdf(x, single) == pytest.approx(math.exp(-x), rel=1e-12), f"x={x}"
    middle = RfHopConfig(n_relays=3, rank=2, rho=1.0, avg_snr=1.0)
    assert abs(rf_pdf(0.0, middle)) < 1e-12
    assert rf_pdf(-1.0, middle) == 0.0

    cfg = RfHopConfig(n_relays=4, rank=2, rho=0.7, avg_snr=3.0)
    total, _ = integrate.quad(lambda x: rf_pdf(x, cfg), 0.0, np.inf, epsabs=1e-12, epsrel=1e-12)
    assert total == pytest.approx(1.0, abs=1e-9), "density must integrate to one"


def test_rf_cdf_examples():
    """CDF limits and the max-of-two oracle"""
    cfg = RfHopConfig(n_relays=2, rank=2, rho=1.0, avg_snr=1.0)
    assert rf_cdf(1.0, cfg) == pytest.approx((1.0 - math.exp(-1.0)) ** 2, rel=1e-12)
    assert rf_cdf(0.0, cfg) == 0.0
    assert rf_cdf(1e4, cfg) == pytest.approx(1.0, abs=1e-15)
    values = rf_cdf(np.linspace(0.0, 10.0, 200), RfHopConfig(n_relays=5, rank=3, rho=0.4, avg_snr=2.0))
    assert np.all(np.diff(values) >= 0.0), "CDF must be nondecreasing"


def test_rf_cdf_matches_order_statistics_at_full_correlation():
    """At ρ=1 the selected SNR is the m-th order statistic of N iid exponentials"""
    grid = np.linspace(0.01, 8.0, 100)
    for n_relays in range(1, 7):
        for rank in range(1, n_relays + 1):
            cfg = RfHopConfig(n_relays=n_relays, rank=rank, rho=1.0, avg_snr=1.7)
            expected = np.array([_order_statistic_cdf(x, n_relays, rank, 1.7) for x in grid])
            assert np.max(np.abs(rf_cdf(grid, cfg) - expected)) < 1e-10, f"N={n_relays}, m={rank}"


def test_rf_cdf_is_integral_of_pdf():
    """rf_cdf(x) = ∫0^x rf_pdf on randomized configs"""
    rng = np.random.default_rng(3)
    for _ in range(20):
        n_relays = int(rng.integers(1, 7))
        cfg = RfHopConfig(
            n_relays=n_relays,
            rank=int(rng.integers(1, n_relays + 1)),
            rho=float(rng.uniform(0.0, 1.0)),
            avg_snr=float(rng.uniform(0.5, 20.0)),
        )
        x = float(rng.uniform(0.1, 3.0)) * cfg.avg_snr
        integral, _ = integrate.quad(lambda t: rf_pdf(t, cfg), 0.0, x, epsabs=1e-13, epsrel=1e-12)
        assert rf_cdf(x, cfg) == pytest.approx(integral, abs=1e-8), str(cfg)


def test_rf_mean_examples_and_monotonicity():
    """Mean reproduces order-statistic means and grows with rank"""
    assert rf_mean(RfHopConfig(n_relays=1, rank=1, rho=0.2, avg_snr=4.0)) == pytest.approx(4.0, rel=1e-12)
    assert rf_mean(RfHopConfig(n_relays=2, rank=2, rho=1.0, avg_snr=1.0)) == pytest.approx(1.5, rel=1e-12)
    assert rf_mean(RfHopConfig(n_relays=3, rank=2, rho=1.0, avg_snr=1.0)) == pytest.approx(5.0 / 6.0, rel=1e-12)
    for rho in (0.0, 0.5, 1.0):
        means = [rf_mean(RfHopConfig(n_relays=5, rank=m, rho=rho, avg_snr=1.0)) for m in range(1, 6)]
        assert all(b >= a - 1e-12 for a, b in zip(means, means[1:])), f"ρ={rho}: {means}"


@pytest.mark.parametrize("n_relays, rank", [(10, 5), (12, 6), (40, 20), (60, 30)])
def test_large_populations_match_order_statistics(n_relays, rank):
    """Heavily cancelling mixtures still reproduce the m-of-N order statistic at ρ=1"""
    cfg = RfHopConfig(n_relays=n_relays, rank=rank, rho=1.0, avg_snr=1.0)
    grid = np.array([0.2, 0.5, 0.7, 1.0, 1.5, 2.5])
    p = -np.expm1(-grid)
    expected_cdf = special.betainc(rank, n_relays - rank + 1, p)
    expected_pdf = stats.beta.pdf(p, rank, n_relays - rank + 1) * np.exp(-grid)
    assert np.allclose(rf_cdf(grid, cfg), expected_cdf, rtol=1e-9, atol=1e-13), f"N={n_relays}, m={rank}"
    assert np.allclose(rf_pdf(grid, cfg), expected_pdf, rtol=1e-9, atol=1e-13), f"N={n_relays}, m={rank}"

    expected_mean = sum(1.0 / j for j in range(n_relays - rank + 1, n_relays + 1))
    assert rf_mean(cfg) == pytest.approx(expected_mean, rel=1e-10), f"N={n_relays}, m={rank}"


def test_large_population_cancellation_switches_precision():
    """Both sides of the float/extended switch agree with a directly integrated density"""
    small = RfHopConfig(n_relays=10, rank=5, rho=0.6, avg_snr=2.0)
    large = RfHopConfig(n_relays=40, rank=20, rho=0.6, avg_snr=2.0)
    assert selection_cancellation(small) < FLOAT_CANCELLATION_LIMIT < selection_cancellation(large)
    for cfg in (small, large):
        total, _ = integrate.quad(lambda x: rf_pdf(x, cfg), 0.0, 60.0, epsabs=1e-11, epsrel=1e-10, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8), f"N={cfg.n_relays}: density integrates to {total}"
        values = rf_cdf(np.linspace(0.0, 20.0, 81), cfg)
        assert np.all(np.diff(values) >= 0.0) and values[-1] == pytest.approx(1.0, abs=1e-10)
        mean, _ = integrate.quad(lambda x: x * rf_pdf(x, cfg), 0.0, 80.0, epsabs=1e-10, epsrel=1e-10, limit=200)
        assert rf_mean(cfg) == pytest.approx(mean, rel=1e-7)


def test_rf_sample_single_relay_mean():
    """Unselected Rayleigh hop has mean γ̄₁"""
    cfg = RfHopConfig(n_relays=1, rank=1, rho=0.0, avg_snr=2.5)
    draws = rf_sample(cfg, np.random.default_rng(11), 1_000_000)
    standard_error = draws.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - 2.5) < 4.0 * standard_error


def test_rf_sample_best_of_five_distribution():
    """At ρ=1 the best of five follows (1 - e^-x)^5"""
    cfg = RfHopConfig(n_relays=5, rank=5, rho=1.0, avg_snr=1.0)
    draws = rf_sample(cfg, np.random.default_rng(12), 1_000_000)
    statistic = stats.kstest(draws, lambda x: (-np.expm1(-np.asarray(x))) ** 5).statistic
    assert statistic < 0.002, f"KS distance {statistic:.4g}"


def test_rf_sample_matches_analytic_statistics():
    """Sampler mean and distribution agree with rf_mean and rf_cdf under outdated CSI"""
    cfg = RfHopConfig(n_relays=3, rank=2, rho=0.5, avg_snr=1.0)
    draws = rf_sample(cfg, np.random.default_rng(13), 1_000_000)
    standard_error = draws.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - rf_mean(cfg)) < 4.0 * standard_error

    uncorrelated = RfHopConfig(n_relays=4, rank=3, rho=0.0, avg_snr=1.0)
    draws = rf_sample(uncorrelated, np.random.default_rng(14), 1_000_000)
    statistic = stats.kstest(draws, lambda x: rf_cdf(x, uncorrelated)).statistic
    assert statistic < 0.002, f"KS distance {statistic:.4g}"
    assert isinstance(rf_sample(cfg, np.random.default_rng(0)), float), "size=None gives a scalar"


if __name__ == "__main__":
    test_config_rejects_rank_above_population()
    test_jakes_rho()
    test_rf_pdf_examples()
    test_rf_cdf_examples()
    test_rf_cdf_matches_order_statistics_at_full_correlation()
    test_rf_cdf_is_integral_of_pdf()
    test_rf_mean_examples_and_monotonicity()
    for n_relays, rank in [(10, 5), (12, 6), (40, 20), (60, 30)]:
        test_large_populations_match_order_statistics(n_relays, rank)
    test_large_population_cancellation_switches_precision()
    test_rf_sample_single_relay_mean()
    test_rf_sample_best_of_five_distribution()
    test_rf_sample_matches_analytic_statistics()
    print("All rf_hop tests passed")
