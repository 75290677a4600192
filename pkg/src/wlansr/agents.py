"""Per-AP strategies and the synchronous round orchestrator.

Every strategy speaks the same protocol: emit a prescription, apply the
consensus of the prescriptions received, then digest the round's feedback.
Fixed-configuration and single-AP strategies simply prescribe for themselves,
making consensus the identity. Rounds are lockstep; message delivery is
reliable and in-order unless a loss probability is injected for testing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .acquisition import AcquisitionConfig, maximize_ei
from .channel import ChannelOracle
from .consensus import Prescription, consensus_for_ap
from .gp import DEFAULT_WINDOW, GpModel
from .metrics import MetricsRecord, RewardBounds, normalized_reward, reward_bounds, starvation_count
from .rewards import global_reward, local_reward, selfish_reward
from .topology import (
    DEFAULT_CONFIG,
    OBSS_PD_MAX,
    OBSS_PD_MIN,
    TX_PWR_MAX,
    TX_PWR_MIN,
    Configuration,
    JointConfiguration,
    NeighborhoodMap,
    Topology,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("inspire", "default", "dsc", "thompson")

PHASE_PRESCRIBE = "PRESCRIBE"
PHASE_REPORT = "REPORT"


@dataclass(frozen=True)
class RoundMessage:
    sender: int
    phase: str
    prescription: Prescription | None = None
    selfish_reward: float | None = None
    neighborhood_size: int | None = None
    applied_config: Configuration | None = None

    def __post_init__(self):
        if self.phase == PHASE_PRESCRIBE:
            if self.prescription is None:
                raise ValueError("PRESCRIBE message must carry a prescription")
        elif self.phase == PHASE_REPORT:
            if None in (self.selfish_reward, self.neighborhood_size, self.applied_config):
                raise ValueError("REPORT message must carry reward, size, and applied config")
        else:
            raise ValueError(f"unknown phase {self.phase!r}")


@dataclass
class AgentFeedback:
    """What one AP learns at the end of a round.

    The neighborhood-scoped maps contain only entries whose REPORT message
    arrived; the two scalar fields exist for strategies whose published pull
    area is wider than the neighborhood.
    """

    applied: Mapping[int, Configuration]
    selfish: Mapping[int, float]
    neighborhood_sizes: Mapping[int, int]
    max_neighbor_rssi_dbm: float | None = None
    normalized_global_reward: float | None = None


class Agent:
    strategy = "base"

    def __init__(self, ap: int, neighborhood: frozenset[int], rng: np.random.Generator):
        self.ap = ap
        self.neighborhood = frozenset(neighborhood)
        self.rng = rng

    def prescribe(self) -> Prescription:
        raise NotImplementedError

    def integrate(self, feedback: AgentFeedback) -> None:
        pass

    def _self_prescription(self, config: Configuration) -> Prescription:
        return Prescription(self.ap, {self.ap: config.as_pair()})


def default_strategy() -> Configuration:
    """The do-nothing control: factory sensing and power."""
    return DEFAULT_CONFIG


class DefaultAgent(Agent):
    strategy = "default"

    def prescribe(self) -> Prescription:
        return self._self_prescription(default_strategy())


def dsc_step(strongest_neighbor_rssi: float, margin_db: float = 1.0) -> Configuration:
    """Raise the sensing threshold just above the loudest neighbor."""
    obss = int(round(strongest_neighbor_rssi + margin_db))
    return Configuration(min(max(obss, OBSS_PD_MIN), OBSS_PD_MAX), 20)


class DscAgent(Agent):
    strategy = "dsc"

    def __init__(self, ap, neighborhood, rng):
        super().__init__(ap, neighborhood, rng)
        self._rssi: float | None = None

    def prescribe(self) -> Prescription:
        config = DEFAULT_CONFIG if self._rssi is None else dsc_step(self._rssi)
        return self._self_prescription(config)

    def integrate(self, feedback: AgentFeedback) -> None:
        if feedback.max_neighbor_rssi_dbm is not None:
            self._rssi = feedback.max_neighbor_rssi_dbm


THOMPSON_OBSS_ARMS = (-82, -77, -72, -67, -62)
THOMPSON_TX_ARMS = (1, 6, 11, 16, 21)
THOMPSON_PRIOR_VAR = 1.0
THOMPSON_OBS_VAR = 0.01


class ThompsonAgent(Agent):
    """Gaussian Thompson sampling over a fixed 5x5 grid of own configurations.

    Known-variance conjugate updates with a zero-mean prior; the observed
    reward is the round's normalized global reward.
    """

    strategy = "thompson"

    def __init__(self, ap, neighborhood, rng):
        super().__init__(ap, neighborhood, rng)
        self.arms = tuple(
            Configuration(o, t) for o in THOMPSON_OBSS_ARMS for t in THOMPSON_TX_ARMS
        )
        self.counts = np.zeros(len(self.arms))
        self.sums = np.zeros(len(self.arms))
        self._pending: int | None = None

    def posterior_params(self) -> tuple[np.ndarray, np.ndarray]:
        precision = 1.0 / THOMPSON_PRIOR_VAR + self.counts / THOMPSON_OBS_VAR
        means = (self.sums / THOMPSON_OBS_VAR) / precision
        return means, 1.0 / precision

    def prescribe(self) -> Prescription:
        means, variances = self.posterior_params()
        samples = means + np.sqrt(variances) * self.rng.standard_normal(len(self.arms))
        self._pending = int(np.argmax(samples))
        return self._self_prescription(self.arms[self._pending])

    def integrate(self, feedback: AgentFeedback) -> None:
        if self._pending is None or feedback.normalized_global_reward is None:
            return
        self.counts[self._pending] += 1
        self.sums[self._pending] += feedback.normalized_global_reward


class InspireAgent(Agent):
    """Neighborhood Bayesian optimizer.

    Keeps a GP over the joint configuration box of its neighborhood, proposes
    the EI maximizer each round (uniform random during a short bootstrap),
    and learns from the configuration the neighborhood actually applied
    together with the altruistic local reward it produced.
    """

    strategy = "inspire"

    def __init__(
        self,
        ap: int,
        neighborhood: frozenset[int],
        rng: np.random.Generator,
        *,
        window: int = DEFAULT_WINDOW,
        bootstrap_rounds: int = 5,
        acq_cfg: AcquisitionConfig | None = None,
        refit_every: int = 10,
    ):
        super().__init__(ap, neighborhood, rng)
        self.members = tuple(sorted(neighborhood))
        lower = [OBSS_PD_MIN, TX_PWR_MIN] * len(self.members)
        upper = [OBSS_PD_MAX, TX_PWR_MAX] * len(self.members)
        self.gp = GpModel(lower, upper, window=window)
        self.bootstrap_remaining = bootstrap_rounds
        # Rounding to the 1 dBm grid caps useful ascent precision at ~0.05
        # normalized units; a coarser tolerance converges in far fewer steps.
        self.acq_cfg = acq_cfg or AcquisitionConfig(max_steps=25, convergence_tol=1e-3)
        self.refit_every = refit_every
        self._adds_since_refit = 0
        self._refit_count = 0
        self.invalid_rounds = 0

    @property
    def incumbent(self) -> float | None:
        return self.gp.incumbent if len(self.gp) else None

    def prescribe(self) -> Prescription:
        if self.bootstrap_remaining > 0:
            self.bootstrap_remaining -= 1
            vec = np.empty(2 * len(self.members))
            vec[0::2] = self.rng.integers(OBSS_PD_MIN, OBSS_PD_MAX + 1, len(self.members))
            vec[1::2] = self.rng.integers(TX_PWR_MIN, TX_PWR_MAX + 1, len(self.members))
        else:
            vec = maximize_ei(self.gp, None, self.acq_cfg, self.rng)
        targets = {
            ap: (float(vec[2 * k]), float(vec[2 * k + 1])) for k, ap in enumerate(self.members)
        }
        return Prescription(self.ap, targets)

    def integrate(self, feedback: AgentFeedback) -> None:
        missing = [
            j
            for j in self.members
            if j not in feedback.selfish
            or j not in feedback.neighborhood_sizes
            or j not in feedback.applied
        ]
        if missing:
            self.invalid_rounds += 1
            logger.debug("AP %d: round invalid, missing reports from %s", self.ap, missing)
            return
        reward = local_reward(
            feedback.selfish, feedback.neighborhood_sizes, self.ap, self.members
        )
        x = np.empty(2 * len(self.members))
        for k, ap in enumerate(self.members):
            x[2 * k], x[2 * k + 1] = feedback.applied[ap].as_pair()
        self.gp.add(x, reward)
        self._adds_since_refit += 1
        # Refit on a schedule: every `refit_every` adds while the window is
        # filling, five times sparser once it is full (the windowed data
        # distribution then drifts slowly and a refit costs O(W^3)).
        interval = self.refit_every if len(self.gp) < self.gp.window else 5 * self.refit_every
        if self._adds_since_refit >= interval and len(self.gp) >= 5:
            # Full multi-start periodically; in between, a warm restart from
            # the current optimum tracks the slowly drifting likelihood.
            starts = 4 if self._refit_count % 5 == 0 else 1
            self.gp.optimize_hyperparams(starts=starts)
            self._refit_count += 1
            self._adds_since_refit = 0


def build_agents(
    strategy: str,
    topology: Topology,
    neighborhoods: NeighborhoodMap,
    seed_seq: np.random.SeedSequence,
    **agent_kwargs,
) -> dict[int, Agent]:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; pick one of {STRATEGIES}")
    classes = {
        "inspire": InspireAgent,
        "default": DefaultAgent,
        "dsc": DscAgent,
        "thompson": ThompsonAgent,
    }
    cls = classes[strategy]
    ap_ids = topology.ap_ids
    children = seed_seq.spawn(len(ap_ids))
    kwargs = agent_kwargs if strategy == "inspire" else {}
    return {
        ap: cls(ap, neighborhoods.of(ap), np.random.default_rng(child), **kwargs)
        for ap, child in zip(ap_ids, children)
    }


class RoundOrchestrator:
    """Runs lockstep rounds: prescribe, aggregate, evaluate, report."""

    def __init__(
        self,
        topology: Topology,
        neighborhoods: NeighborhoodMap,
        oracle: ChannelOracle,
        agents: Mapping[int, Agent],
        *,
        loss_rng: np.random.Generator | None = None,
        loss_prob: float = 0.0,
        bounds: RewardBounds | None = None,
    ):
        if set(agents) != set(topology.ap_ids):
            raise ValueError("need exactly one agent per AP")
        if not 0.0 <= loss_prob < 1.0:
            raise ValueError("loss_prob must be in [0, 1)")
        self.topology = topology
        self.neighborhoods = neighborhoods
        self.oracle = oracle
        self.agents = dict(agents)
        self.loss_prob = loss_prob
        self.loss_rng = loss_rng or np.random.default_rng(0)
        self.attainable = oracle.attainable()
        self.bounds = bounds or reward_bounds(topology, self.attainable)
        self.iteration = 0
        self.messages_dropped = 0
        self.last_joint: JointConfiguration | None = None
        self.last_prescriptions_received: dict[int, int] = {}

    def _lost(self) -> bool:
        if self.loss_prob <= 0.0:
            return False
        if self.loss_rng.random() < self.loss_prob:
            self.messages_dropped += 1
            return True
        return False

    def _strongest_neighbor_rssi(self, joint: JointConfiguration) -> dict[int, float | None]:
        order = self.oracle.ap_order
        _, tx = joint.arrays(order)
        rx = tx[:, None] - self.oracle.pl_ap_ap  # rx[i, j]: power of i at j
        np.fill_diagonal(rx, -np.inf)
        strongest = rx.max(axis=0)
        return {
            ap: (float(strongest[j]) if np.isfinite(strongest[j]) else None)
            for j, ap in enumerate(order)
        }

    def run_round(self) -> MetricsRecord:
        order = sorted(self.topology.ap_ids)

        prescriptions = {i: self.agents[i].prescribe() for i in order}
        inboxes: dict[int, list[Prescription]] = {i: [] for i in order}
        for i in order:
            message = RoundMessage(i, PHASE_PRESCRIBE, prescription=prescriptions[i])
            for j in sorted(self.neighborhoods.of(i)):
                if j == i or not self._lost():
                    inboxes[j].append(message.prescription)

        self.last_prescriptions_received = {j: len(inboxes[j]) for j in order}
        applied = {j: consensus_for_ap(j, inboxes[j])[1] for j in order}
        joint = JointConfiguration(applied)
        self.last_joint = joint

        report = self.oracle.evaluate(joint)
        selfish = {i: selfish_reward(report, i, self.topology) for i in order}
        reward = global_reward(report, self.topology)
        norm = normalized_reward(reward, self.bounds)
        rssi = self._strongest_neighbor_rssi(joint)

        received: dict[int, dict[int, RoundMessage]] = {i: {} for i in order}
        for i in order:
            message = RoundMessage(
                i,
                PHASE_REPORT,
                selfish_reward=selfish[i],
                neighborhood_size=len(self.neighborhoods.of(i)),
                applied_config=applied[i],
            )
            for j in sorted(self.neighborhoods.of(i)):
                if j == i or not self._lost():
                    received[j][i] = message

        for i in order:
            messages = received[i]
            self.agents[i].integrate(
                AgentFeedback(
                    applied={j: m.applied_config for j, m in messages.items()},
                    selfish={j: m.selfish_reward for j, m in messages.items()},
                    neighborhood_sizes={j: m.neighborhood_size for j, m in messages.items()},
                    max_neighbor_rssi_dbm=rssi[i],
                    normalized_global_reward=norm,
                )
            )

        self.iteration += 1
        return MetricsRecord(
            iteration=self.iteration,
            global_reward=reward,
            normalized_reward=norm,
            starving_count=starvation_count(report, self.attainable),
            cumulated_throughput_mbps=report.total_mbps,
        )
