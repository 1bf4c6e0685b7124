"""
Monte Carlo latency simulation of an F-RAN downlink.

A trial draws caches, demands and channels from independent substreams,
evaluates the fronthaul load of every delivery strategy on the same
realization, solves the edge beamforming problem once, and composes the
pipelined latency ``T_total = max(T_F, T_E)``.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from batch_processor import ParallelTrialRunner
from cache_placement import populate_caches
from config import STRATEGIES, RunStats, SystemConfig
from edge_optimizer import maximize_min_rate
from fran_model import (
    STREAM_CACHE,
    STREAM_CHANNEL,
    STREAM_DEMAND,
    sample_channel,
    sample_demand,
    serving_sets,
    trial_rng,
    zipf_pmf,
)
from fronthaul import coded_bits, compute_requirements, multicast_bits, unicast_bits

logger = logging.getLogger(__name__)

CI_Z = 1.96


def edge_latency(rates: Sequence[float], S: float) -> float:
    """Symbols needed to deliver ``S`` bits at the slowest UE's rate."""
    r_min = float(np.min(rates))
    if r_min <= 0:
        return math.inf
    return S / r_min


def fronthaul_latency(S_B: float, C: float) -> float:
    """Symbols needed to multicast ``S_B`` bits at capacity ``C``."""
    if S_B == 0:
        return 0.0
    if C == 0:
        return math.inf
    return S_B / C


def total_latency(T_F: float, T_E: float) -> float:
    """Pipelined fronthaul and edge transmission finish together."""
    return max(T_F, T_E)


@dataclass(frozen=True)
class TrialResult:
    """Latencies of one realization; all latencies in symbols."""

    trial_index: int
    T_F: Dict[str, float]
    T_E: float
    T_total: Dict[str, float]
    R_min: float
    S_B: Dict[str, float]
    n_sub: int
    outer_iterations: int
    solver_stalled: bool

    def is_infinite(self, strategy: str) -> bool:
        return math.isinf(self.T_total[strategy])


def run_trial(master_seed: int, trial_index: int, cfg: SystemConfig) -> TrialResult:
    """
    Simulate one realization of caches, demands and channels.

    Every strategy sees the same realization and the edge optimizer runs
    once since ``T_E`` does not depend on the fronthaul strategy.
    """
    cache = populate_caches(trial_rng(master_seed, trial_index, STREAM_CACHE), cfg)
    demand = sample_demand(
        trial_rng(master_seed, trial_index, STREAM_DEMAND),
        zipf_pmf(cfg.F, cfg.gamma),
        cfg.N,
    )
    channel = sample_channel(trial_rng(master_seed, trial_index, STREAM_CHANNEL), cfg)
    serving = serving_sets(cfg.M, cfg.N)

    req = compute_requirements(cache, demand, serving)
    loads = {
        "unicast": unicast_bits(req, cfg.subfile_size),
        "multicast": multicast_bits(req, cfg.subfile_size),
        "coded": coded_bits(req, cache, cfg.subfile_size),
    }

    solution = maximize_min_rate(channel, serving, cfg)
    T_E = edge_latency(solution.rates, cfg.S)
    T_F = {name: fronthaul_latency(load.S_B, cfg.C) for name, load in loads.items()}

    if solution.stalled:
        logger.warning(f"Solver stalled in trial {trial_index}")

    return TrialResult(
        trial_index=trial_index,
        T_F=T_F,
        T_E=T_E,
        T_total={name: total_latency(T_F[name], T_E) for name in STRATEGIES},
        R_min=solution.R_min,
        S_B={name: load.S_B for name, load in loads.items()},
        n_sub=loads["coded"].n_sub,
        outer_iterations=solution.outer_iterations,
        solver_stalled=solution.stalled,
    )


def mean_ci(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and 95% half-width of the finite entries of ``values``."""
    finite = np.array([v for v in values if math.isfinite(v)], dtype=float)
    if finite.size == 0:
        return math.inf, math.inf
    if finite.size == 1:
        return float(finite[0]), 0.0
    return (
        float(finite.mean()),
        float(CI_Z * finite.std(ddof=1) / math.sqrt(finite.size)),
    )


@dataclass(frozen=True)
class StrategySummary:
    """Means and 95% half-widths of one strategy's latencies."""

    TF_mean: float
    TF_ci95: float
    TE_mean: float
    TE_ci95: float
    Ttotal_mean: float
    Ttotal_ci95: float
    inf_trials: int


@dataclass(frozen=True)
class AggregateResult:
    """Statistics of one experiment over all of its trials."""

    strategies: Dict[str, StrategySummary]
    n_trials: int
    config: SystemConfig
    master_seed: int
    stalled_trials: int = 0
    trials: Tuple[TrialResult, ...] = field(default=(), repr=False)

    def coded_gain(self) -> float:
        """Mean multicast over mean coded fronthaul latency."""
        coded = self.strategies["coded"].TF_mean
        multicast = self.strategies["multicast"].TF_mean
        if coded == 0:
            return 1.0 if multicast == 0 else math.inf
        return multicast / coded


def aggregate(
    trials: Sequence[TrialResult], cfg: SystemConfig, master_seed: int
) -> AggregateResult:
    """Reduce trial results, in trial order, to per-strategy statistics."""
    summaries = {}
    for name in STRATEGIES:
        tf_mean, tf_ci = mean_ci([t.T_F[name] for t in trials])
        te_mean, te_ci = mean_ci([t.T_E for t in trials])
        tt_mean, tt_ci = mean_ci([t.T_total[name] for t in trials])
        summaries[name] = StrategySummary(
            TF_mean=tf_mean,
            TF_ci95=tf_ci,
            TE_mean=te_mean,
            TE_ci95=te_ci,
            Ttotal_mean=tt_mean,
            Ttotal_ci95=tt_ci,
            inf_trials=sum(1 for t in trials if t.is_infinite(name)),
        )
    return AggregateResult(
        strategies=summaries,
        n_trials=len(trials),
        config=cfg,
        master_seed=master_seed,
        stalled_trials=sum(1 for t in trials if t.solver_stalled),
        trials=tuple(trials),
    )


def run_experiment(
    cfg: SystemConfig,
    n_trials: int,
    master_seed: int,
    workers: Optional[int] = None,
    stats: Optional[RunStats] = None,
    progress_callback: Optional[Callable[[float, str], None]] = None,
) -> AggregateResult:
    """
    Run ``n_trials`` independent trials and aggregate them.

    Args:
        cfg: Scenario parameters
        n_trials: Number of trials, at least 1
        master_seed: Seed from which every trial substream derives
        workers: Worker threads; 1 runs sequentially
        stats: Optional counters updated with every trial
        progress_callback: Optional ``(percent, message)`` callback

    Returns:
        Aggregate statistics, identical for any ``workers`` value
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")

    start = time.monotonic()
    runner = ParallelTrialRunner(max_workers=workers)
    trials: List[TrialResult] = runner.run(
        range(n_trials),
        lambda index: run_trial(master_seed, index, cfg),
        progress_callback,
    )
    result = aggregate(trials, cfg, master_seed)

    if stats is not None:
        for t in trials:
            stats.add_trial(
                t.solver_stalled, any(t.is_infinite(name) for name in STRATEGIES)
            )
        stats.elapsed_seconds += time.monotonic() - start

    infinite = max(s.inf_trials for s in result.strategies.values())
    if infinite:
        logger.warning(
            f"{infinite} of {n_trials} trials had infinite latency "
            "and are excluded from means"
        )
    return result
