"""Log proportional-fairness rewards at selfish, neighborhood, and global scale.

Throughputs are floored at ``EPSILON_MBPS`` before the logarithm so dead links
yield a large negative (but finite) contribution and preserve ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .channel import ThroughputReport
from .topology import NeighborhoodMap, Topology

EPSILON_MBPS = 1e-3


class MissingNeighborDataError(KeyError):
    """A neighbor's report is absent (lost message or dead peer)."""


def _log_pf(throughputs: Iterable[float]) -> float:
    return sum(math.log(max(t, EPSILON_MBPS)) for t in throughputs)


def selfish_reward(report: ThroughputReport, ap: int, topology: Topology) -> float:
    """Sum of log throughputs over the AP's own STAs; 0 with no STAs."""
    stas = topology.stas_by_ap[ap]
    missing = [s for s in stas if s not in report.per_sta]
    if missing:
        raise ValueError(f"report missing STAs {missing} of AP {ap}")
    return _log_pf(report.per_sta[s] for s in stas)


def local_reward(
    selfish: Mapping[int, float],
    neighborhood_sizes: Mapping[int, int],
    ap: int,
    neighborhood: Iterable[int] | None = None,
) -> float:
    """Altruistic reward: each neighbor's selfish reward, diluted by how many
    neighborhoods that neighbor belongs to."""
    members = tuple(neighborhood) if neighborhood is not None else tuple(selfish)
    total = 0.0
    for j in members:
        if j not in selfish or j not in neighborhood_sizes:
            raise MissingNeighborDataError(f"AP {ap}: no report from neighbor {j}")
        total += selfish[j] / neighborhood_sizes[j]
    return total


def global_reward(report: ThroughputReport, topology: Topology) -> float:
    missing = [s for s in topology.sta_ids if s not in report.per_sta]
    if missing:
        raise ValueError(f"report missing STAs {missing}")
    return _log_pf(report.per_sta[s] for s in topology.sta_ids)


@dataclass(frozen=True)
class RewardRecord:
    selfish: Mapping[int, float]
    local: Mapping[int, float]
    global_reward: float


def compute_rewards(
    report: ThroughputReport, topology: Topology, neighborhoods: NeighborhoodMap
) -> RewardRecord:
    """All reward levels for one throughput report."""
    selfish = {ap: selfish_reward(report, ap, topology) for ap in topology.ap_ids}
    sizes = neighborhoods.sizes()
    local = {
        ap: local_reward(selfish, sizes, ap, neighborhoods.of(ap)) for ap in topology.ap_ids
    }
    return RewardRecord(selfish, local, global_reward(report, topology))
