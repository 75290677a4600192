"""Distributed configuration optimization for WLAN spatial reuse.

Per-AP Gaussian-process agents propose transmit-power and sensitivity
settings for their radio neighborhoods, aggregate overlapping proposals by
weighted marginal median, and learn from log-proportional-fairness rewards
measured by a deterministic analytic throughput oracle.
"""

from .acquisition import AcquisitionConfig, expected_improvement, maximize_ei, round_to_grid
from .agents import RoundOrchestrator, build_agents
from .channel import ChannelOracle, OracleParams, PathLossParams, RateTable, ThroughputReport
from .consensus import Prescription, psi_objective, weighted_marginal_median
from .gp import GpModel, KernelParams, PosteriorStats
from .harness import ExperimentConfig, resolve_topology, run_experiment
from .metrics import MetricsRecord, cumulative_regret, ema, normalized_reward, quartiles
from .rewards import compute_rewards, global_reward, local_reward, selfish_reward
from .topology import (
    Building,
    Configuration,
    JointConfiguration,
    NeighborhoodMap,
    Node,
    Topology,
    compute_neighborhoods,
    generate_apartment_topology,
    generate_office_topology,
    load_topology,
)

__version__ = "0.1.0"
