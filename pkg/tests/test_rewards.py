"""Log proportional-fairness rewards and the local/global sum identity."""

import math

import numpy as np
import pytest

from wlansr.channel import ThroughputReport, evaluate_throughput
from wlansr.rewards import (
    EPSILON_MBPS,
    MissingNeighborDataError,
    compute_rewards,
    global_reward,
    local_reward,
    selfish_reward,
)
from wlansr.topology import Building, Node, Topology, compute_neighborhoods

from conftest import random_joint, random_topology


def report_for(throughputs: dict) -> ThroughputReport:
    return ThroughputReport(throughputs, {})


def star_topology(sta_throughputs):
    stas = tuple(Node(i + 1, "STA", (1.0 + i, 0, 0)) for i in range(len(sta_throughputs)))
    topo = Topology(
        (Node(0, "AP", (0, 0, 0)),), stas, {s.id: 0 for s in stas}, Building()
    )
    report = report_for({s.id: t for s, t in zip(stas, sta_throughputs)})
    return topo, report


class TestSelfishReward:
    def test_log_of_product(self):
        topo, report = star_topology([math.e, math.e**2, math.e**3])
        assert selfish_reward(report, 0, topo) == pytest.approx(6.0, abs=1e-12)

    def test_zero_throughput_clamped(self):
        topo, report = star_topology([0.0])
        assert selfish_reward(report, 0, topo) == pytest.approx(math.log(EPSILON_MBPS))

    def test_no_stas_empty_product(self):
        topo = Topology((Node(0, "AP", (0, 0, 0)),), (), {}, Building())
        assert selfish_reward(report_for({}), 0, topo) == 0.0

    def test_missing_sta_rejected(self):
        topo, _ = star_topology([1.0, 2.0])
        with pytest.raises(ValueError, match="missing"):
            selfish_reward(report_for({1: 1.0}), 0, topo)


class TestLocalReward:
    def test_singleton_neighborhood(self):
        assert local_reward({0: 4.2}, {0: 1}, 0, [0]) == pytest.approx(4.2)

    def test_three_neighbor_hand_evaluation(self):
        # N_1 = {1, 2, 4}, every selfish reward 3, every |N_j| = 3.
        selfish = {1: 3.0, 2: 3.0, 4: 3.0}
        sizes = {1: 3, 2: 3, 4: 3}
        assert local_reward(selfish, sizes, 1, [1, 2, 4]) == pytest.approx(3.0)

    def test_symmetric_pair(self):
        a, b = 1.7, -0.4
        selfish = {0: a, 1: b}
        sizes = {0: 2, 1: 2}
        for ap in (0, 1):
            assert local_reward(selfish, sizes, ap, [0, 1]) == pytest.approx((a + b) / 2)

    def test_missing_neighbor_raises(self):
        with pytest.raises(MissingNeighborDataError):
            local_reward({0: 1.0}, {0: 1}, 0, [0, 1])


class TestGlobalReward:
    def test_single_sta(self):
        topo, report = star_topology([math.e])
        assert global_reward(report, topo) == pytest.approx(1.0)

    def test_equals_sum_of_selfish(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            topo = random_topology(rng)
            report = evaluate_throughput(topo, random_joint(rng, topo))
            total = sum(selfish_reward(report, ap, topo) for ap in topo.ap_ids)
            assert global_reward(report, topo) == pytest.approx(total, abs=1e-9)

    def test_equals_sum_of_local(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            topo = random_topology(rng)
            nbhd = compute_neighborhoods(topo)
            report = evaluate_throughput(topo, random_joint(rng, topo))
            record = compute_rewards(report, topo, nbhd)
            assert sum(record.local.values()) == pytest.approx(
                record.global_reward, abs=1e-9
            )


class TestProperties:
    def test_monotone_in_any_throughput(self):
        topo, report = star_topology([2.0, 3.0])
        nbhd = compute_neighborhoods(topo)
        base = compute_rewards(report, topo, nbhd)
        raised = compute_rewards(report_for({1: 2.5, 2: 3.0}), topo, nbhd)
        assert raised.selfish[0] > base.selfish[0]
        assert raised.local[0] > base.local[0]
        assert raised.global_reward > base.global_reward

    def test_finite_for_all_zero(self):
        topo, report = star_topology([0.0, 0.0, 0.0])
        nbhd = compute_neighborhoods(topo)
        record = compute_rewards(report, topo, nbhd)
        assert math.isfinite(record.global_reward)
        assert all(math.isfinite(v) for v in record.selfish.values())
