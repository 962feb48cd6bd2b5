"""
Trial-level simulation of the full chain and Monte Carlo estimates of the
outage probability and ergodic capacity.

Trials are cut into fixed-size chunks. Every chunk draws from its own Philox
stream keyed by (root seed, grid point, chunk index), and chunk results are
reduced in chunk order, so an estimate depends only on (cfg, trials, seed,
point) and never on how many workers ran it.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np
from scipy import stats

from rfso.core.fso_hop import irradiance_sample
from rfso.core.link import LinkConfig, gain_constant_C, sndr
from rfso.core.rf_hop import rf_sample

logger = logging.getLogger(__name__)

CHUNK_TRIALS = 1 << 16
MIN_TRIALS = 10_000
CONFIDENCE = 0.95
Z_CONFIDENCE = float(stats.norm.ppf(0.5 + CONFIDENCE / 2.0))
# below this many successes (or failures) the binomial interval is taken exactly
NORMAL_APPROX_MIN_COUNT = 30
# fewer expected outage events than this and the OP estimate is flagged
RELIABLE_MIN_EVENTS = 10

T = TypeVar("T")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate with its 95% confidence half-width."""

    value: float
    half_width: float
    trials: int
    seed: int
    successes: Optional[int] = None
    reliable: bool = True


@dataclass(frozen=True)
class LinkState:
    """Per-trial channel realisations and the resulting SNDR."""

    gamma1: np.ndarray
    irradiance: np.ndarray
    gamma2: np.ndarray
    sndr: np.ndarray


def substream(seed: int, point_index: int = 0, chunk_index: int = 0) -> np.random.Generator:
    """Independent counter-based stream for one chunk of one grid point."""
    sequence = np.random.SeedSequence(seed, spawn_key=(point_index, chunk_index))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_sizes(trials: int, chunk: int = CHUNK_TRIALS) -> List[int]:
    full, rest = divmod(int(trials), chunk)
    return [chunk] * full + ([rest] if rest else [])


def draw_link_state(cfg: LinkConfig, rng: np.random.Generator, size: int, C: Optional[float] = None) -> LinkState:
    """Draw ``size`` independent trials of (γ₁, I, γ₂, SNDR)."""
    if C is None:
        C = gain_constant_C(cfg)
    gamma1 = rf_sample(cfg.rf, rng, size)
    irradiance = irradiance_sample(cfg.optical, rng, size)
    gamma2 = cfg.optical.avg_elec_snr * irradiance ** cfg.optical.r
    return LinkState(gamma1=gamma1, irradiance=irradiance, gamma2=gamma2, sndr=sndr(gamma1, gamma2, cfg, C))


def run_trial(cfg: LinkConfig, C: float, rng: np.random.Generator, size: Optional[int] = None):
    """Realized SNDR of one trial (or ``size`` trials)."""
    state = draw_link_state(cfg, rng, 1 if size is None else size, C)
    return float(state.sndr[0]) if size is None else state.sndr


def _map_chunks(
    work: Callable[[np.random.Generator, int], T],
    trials: int,
    seed: int,
    point_index: int,
    workers: int,
) -> List[T]:
    """Apply ``work`` to every chunk and return the results in chunk order."""
    sizes = chunk_sizes(trials)
    logger.debug(f"point {point_index}: {trials} trials in {len(sizes)} chunk(s), {workers} worker(s)")

    def run(index: int) -> T:
        return work(substream(seed, point_index, index), sizes[index])

    if workers <= 1 or len(sizes) == 1:
        return [run(index) for index in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(len(sizes))))


def simulate_sndr(
    cfg: LinkConfig, trials: int, seed: int, point_index: int = 0, workers: int = 1
) -> np.ndarray:
    """All realized SNDR values of a run, concatenated in chunk order."""
    C = gain_constant_C(cfg)
    chunks = _map_chunks(lambda rng, size: run_trial(cfg, C, rng, size), trials, seed, point_index, workers)
    return np.concatenate(chunks)


def _check_trials(trials: int) -> None:
    if trials < MIN_TRIALS:
        raise ValueError(f"Monte Carlo estimates need at least {MIN_TRIALS} trials, got {trials}")


def binomial_half_width(successes: int, trials: int) -> float:
    """95% half-width: normal approximation, or exact Clopper-Pearson for rare (or near-certain) events."""
    p = successes / trials
    if min(successes, trials - successes) >= NORMAL_APPROX_MIN_COUNT:
        return Z_CONFIDENCE * math.sqrt(p * (1.0 - p) / trials)
    alpha = 1.0 - CONFIDENCE
    low = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2.0, successes, trials - successes + 1))
    high = 1.0 if successes == trials else float(stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes))
    return max(p - low, high - p)


def estimate_op(
    gamma_th: float, cfg: LinkConfig, trials: int, seed: int, point_index: int = 0, workers: int = 1
) -> McEstimate:
    """Fraction of trials whose SNDR falls below ``gamma_th``."""
    _check_trials(trials)
    C = gain_constant_C(cfg)

    def count(rng: np.random.Generator, size: int) -> int:
        return int(np.count_nonzero(run_trial(cfg, C, rng, size) < gamma_th))

    successes = sum(_map_chunks(count, trials, seed, point_index, workers))
    value = successes / trials
    reliable = value * trials >= RELIABLE_MIN_EVENTS or successes == trials
    if not reliable:
        logger.warning(
            f"OP estimate {value:.3e} at γ_th={gamma_th:.6g} rests on {successes} outage events; "
            f"increase trials beyond {trials}"
        )
    return McEstimate(
        value=value,
        half_width=binomial_half_width(successes, trials),
        trials=trials,
        seed=seed,
        successes=successes,
        reliable=reliable,
    )


def _merge_moments(parts: List[Tuple[int, float, float]]) -> Tuple[int, float, float]:
    """Combine (count, mean, sum of squared deviations) chunk summaries in order."""
    count, mean, m2 = 0, 0.0, 0.0
    for n_b, mean_b, m2_b in parts:
        total = count + n_b
        shift = mean_b - mean
        mean += shift * n_b / total
        m2 += m2_b + shift * shift * count * n_b / total
        count = total
    return count, mean, m2


def estimate_ec(cfg: LinkConfig, trials: int, seed: int, point_index: int = 0, workers: int = 1) -> McEstimate:
    """Sample mean of log₂(1 + c·SNDR) with a standard-error half-width."""
    _check_trials(trials)
    C = gain_constant_C(cfg)
    c = cfg.c

    def summarize(rng: np.random.Generator, size: int) -> Tuple[int, float, float]:
        capacity = np.log2(1.0 + c * run_trial(cfg, C, rng, size))
        mean = float(np.mean(capacity))
        return size, mean, float(np.sum((capacity - mean) ** 2))

    count, mean, m2 = _merge_moments(_map_chunks(summarize, trials, seed, point_index, workers))
    variance = m2 / (count - 1)
    return McEstimate(value=mean, half_width=Z_CONFIDENCE * math.sqrt(variance / count), trials=trials, seed=seed)
