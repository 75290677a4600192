"""Per-round experiment metrics and their aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .channel import ChannelOracle, OracleParams, ThroughputReport
from .rewards import EPSILON_MBPS
from .topology import Topology


@dataclass
class MetricsRecord:
    iteration: int
    global_reward: float
    normalized_reward: float
    starving_count: int
    cumulated_throughput_mbps: float
    regret_increment: float = math.nan  # filled once a regret reference exists
    cumulative_regret: float = math.nan


@dataclass(frozen=True)
class RewardBounds:
    r_min: float
    r_max: float


def reward_bounds(
    topology: Topology,
    attainable: Mapping[int, float] | None = None,
    params: OracleParams | None = None,
) -> RewardBounds:
    """Reward range used for normalization: every STA at the floor vs every
    STA at its isolated, default-config throughput."""
    if attainable is None:
        attainable = ChannelOracle(topology, params).attainable()
    r_min = topology.n_stas * math.log(EPSILON_MBPS)
    r_max = sum(math.log(max(attainable[s], EPSILON_MBPS)) for s in topology.sta_ids)
    return RewardBounds(r_min, r_max)


def normalized_reward(global_reward: float, bounds: RewardBounds) -> float:
    if bounds.r_max == bounds.r_min:
        return 1.0 if global_reward >= bounds.r_max else 0.0
    value = (global_reward - bounds.r_min) / (bounds.r_max - bounds.r_min)
    return float(min(max(value, 0.0), 1.0))


def cumulative_regret(normalized_rewards: Sequence[float], reference: float) -> np.ndarray:
    """Running sum of (reference - reward), with increments floored at 0."""
    increments = np.maximum(reference - np.asarray(normalized_rewards, dtype=float), 0.0)
    return np.cumsum(increments)


def starvation_count(report: ThroughputReport, attainable: Mapping[int, float]) -> int:
    """STAs below 10% of their attainable throughput; dead-even-alone STAs
    are excluded from the accounting."""
    count = 0
    for sta, thr in report.per_sta.items():
        reference = attainable.get(sta, 0.0)
        if reference > 0.0 and thr < 0.1 * reference:
            count += 1
    return count


def ema(series: Sequence[float], alpha: float) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    out = np.empty_like(x)
    if len(x):
        out[0] = x[0]
        for t in range(1, len(x)):
            out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def quartiles(replications: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-iteration Q1/median/Q3 across replications (rows = seeds)."""
    arr = np.atleast_2d(np.asarray(replications, dtype=float))
    q1, q2, q3 = np.percentile(arr, [25.0, 50.0, 75.0], axis=0)
    return q1, q2, q3
