"""Deterministic analytic throughput oracle.

Maps a joint (OBSS_PD, TX_PWR) configuration to per-STA downlink throughput:
indoor path loss with wall/floor penalties, carrier-sense conflict graph,
airtime split by largest clique, SINR-driven rate selection, saturated
downlink traffic split evenly across each AP's STAs.

All functions are pure; a :class:`ChannelOracle` instance additionally caches
the pairwise path-loss geometry of a fixed topology for fast repeated
evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .topology import (
    DEFAULT_CONFIG,
    Building,
    Configuration,
    JointConfiguration,
    Topology,
)

MIN_DISTANCE_M = 0.1


@dataclass(frozen=True)
class PathLossParams:
    """ITU-style indoor loss: fixed 1 m reference plus log-distance slope."""

    reference_loss_1m: float = 40.0
    distance_exponent_times10: float = 30.0
    wall_loss: float = 8.0
    floor_loss: float = 4.0

    def __post_init__(self):
        for name in ("reference_loss_1m", "distance_exponent_times10", "wall_loss", "floor_loss"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class RateTable:
    """SINR thresholds (dB) to PHY rates (Mbps), plus MAC efficiency factor."""

    sinr_thresholds_db: tuple[float, ...]
    phy_rates_mbps: tuple[float, ...]
    mac_efficiency: float = 0.7

    def __post_init__(self):
        t, r = self.sinr_thresholds_db, self.phy_rates_mbps
        if len(t) != len(r) or not t:
            raise ValueError("thresholds and rates must be equal-length and nonempty")
        if any(b <= a for a, b in zip(t, t[1:])) or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("thresholds and rates must be strictly increasing")
        if not 0 < self.mac_efficiency <= 1:
            raise ValueError("mac_efficiency must be in (0, 1]")


# Single-stream 20 MHz ladder, MCS0 through MCS11.
DEFAULT_RATE_TABLE = RateTable(
    sinr_thresholds_db=(2.0, 5.0, 9.0, 11.0, 15.0, 18.0, 20.0, 22.0, 25.0, 27.0, 29.0, 31.0),
    phy_rates_mbps=(8.6, 17.2, 25.8, 34.4, 51.6, 68.8, 77.4, 86.0, 103.2, 114.7, 129.0, 143.4),
    mac_efficiency=0.7,
)


@dataclass(frozen=True)
class OracleParams:
    path_loss: PathLossParams = field(default_factory=PathLossParams)
    rate_table: RateTable = DEFAULT_RATE_TABLE
    noise_floor_dbm: float = -94.0
    offered_downlink_mbps: float = 50.0
    default_config: Configuration = DEFAULT_CONFIG

    def with_overrides(self, overrides: Mapping[str, object]) -> "OracleParams":
        """Apply flat overrides: scalar fields, or a whole replacement rate
        table as a list of (sinr_threshold_db, phy_rate_mbps) pairs."""
        params = self
        pl_fields = {"reference_loss_1m", "distance_exponent_times10", "wall_loss", "floor_loss"}
        for key, value in overrides.items():
            if key in pl_fields:
                params = replace(params, path_loss=replace(params.path_loss, **{key: float(value)}))
            elif key == "mac_efficiency":
                params = replace(params, rate_table=replace(params.rate_table, mac_efficiency=float(value)))
            elif key == "rate_table":
                thresholds, rates = zip(*[(float(a), float(b)) for a, b in value])
                params = replace(
                    params,
                    rate_table=RateTable(thresholds, rates, params.rate_table.mac_efficiency),
                )
            elif key in ("noise_floor_dbm", "offered_downlink_mbps"):
                params = replace(params, **{key: float(value)})
            else:
                raise KeyError(f"unknown oracle parameter {key!r}")
        return params


@dataclass(frozen=True)
class ConflictGraph:
    """Carrier-sense structure for one joint configuration.

    ``defers[j, i]`` is True when AP j senses AP i above j's OBSS_PD and must
    hold off; ``conflict`` is the symmetric closure with an empty diagonal.
    """

    ap_order: tuple[int, ...]
    defers: np.ndarray
    conflict: np.ndarray

    def index(self, ap: int) -> int:
        return self.ap_order.index(ap)

    def defers_to(self, j: int, i: int) -> bool:
        return bool(self.defers[self.index(j), self.index(i)])

    def in_conflict(self, i: int, j: int) -> bool:
        return bool(self.conflict[self.index(i), self.index(j)])

    def edges(self) -> set[frozenset[int]]:
        out = set()
        n = len(self.ap_order)
        for a in range(n):
            for b in range(a + 1, n):
                if self.conflict[a, b]:
                    out.add(frozenset((self.ap_order[a], self.ap_order[b])))
        return out


@dataclass(frozen=True)
class ThroughputReport:
    per_sta: Mapping[int, float]
    per_ap_airtime: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "per_sta", dict(self.per_sta))
        object.__setattr__(self, "per_ap_airtime", dict(self.per_ap_airtime))

    @property
    def total_mbps(self) -> float:
        return float(sum(self.per_sta.values()))


# ---------------------------------------------------------------------------
# Geometry: wall and floor crossings
# ---------------------------------------------------------------------------

def _walls_crossed(a, b, building: Building) -> int:
    ax, ay, az = a
    bx, by, bz = b
    count = 0
    for x1, y1, x2, y2, floor in building.wall_planes:
        if x1 == x2:  # vertical wall plane at x = x1
            if (ax - x1) * (bx - x1) >= 0:
                continue
            t = (x1 - ax) / (bx - ax)
            lo, hi = min(y1, y2), max(y1, y2)
            if not lo <= ay + t * (by - ay) <= hi:
                continue
        else:  # horizontal wall plane at y = y1
            if (ay - y1) * (by - y1) >= 0:
                continue
            t = (y1 - ay) / (by - ay)
            lo, hi = min(x1, x2), max(x1, x2)
            if not lo <= ax + t * (bx - ax) <= hi:
                continue
        z = az + t * (bz - az)
        if floor * building.floor_height <= z <= (floor + 1) * building.floor_height:
            count += 1
    return count


def _floors_crossed(a, b, building: Building) -> int:
    return abs(building.floor_index(a[2]) - building.floor_index(b[2]))


def path_loss(a, b, building: Building, params: PathLossParams | None = None) -> float:
    """Log-distance path loss in dB with per-wall and per-floor penalties."""
    p = params or PathLossParams()
    d = max(math.dist(a, b), MIN_DISTANCE_M)
    return (
        p.reference_loss_1m
        + p.distance_exponent_times10 * math.log10(d)
        + p.wall_loss * _walls_crossed(a, b, building)
        + p.floor_loss * _floors_crossed(a, b, building)
    )


def received_power(tx_pwr_dbm: float, pl_db: float) -> float:
    return tx_pwr_dbm - pl_db


def _dbm_to_mw(dbm) -> float:
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


# ---------------------------------------------------------------------------
# Cliques (exact, Bron-Kerbosch with pivoting on bitmasks)
# ---------------------------------------------------------------------------

def _largest_clique_membership(adj: Sequence[int], n: int) -> list[int]:
    """For each vertex, the size of the largest clique containing it.

    ``adj[v]`` is a bitmask of v's neighbors. Every clique extends to a
    maximal clique, so enumerating maximal cliques suffices.
    """
    omega = [1] * n
    all_mask = (1 << n) - 1

    def expand(r_size: int, r_mask: int, p: int, x: int) -> None:
        if p == 0 and x == 0:
            m = r_mask
            while m:
                v = (m & -m).bit_length() - 1
                if r_size > omega[v]:
                    omega[v] = r_size
                m &= m - 1
            return
        pivot_pool = p | x
        pivot = (pivot_pool & -pivot_pool).bit_length() - 1
        best, best_deg = pivot, -1
        m = pivot_pool
        while m:
            u = (m & -m).bit_length() - 1
            deg = bin(p & adj[u]).count("1")
            if deg > best_deg:
                best, best_deg = u, deg
            m &= m - 1
        candidates = p & ~adj[best]
        while candidates:
            v_bit = candidates & -candidates
            v = v_bit.bit_length() - 1
            expand(r_size + 1, r_mask | v_bit, p & adj[v], x & adj[v])
            p &= ~v_bit
            x |= v_bit
            candidates &= candidates - 1

    expand(0, 0, all_mask, 0)
    return omega


def airtime_shares(cg: ConflictGraph, ap_set: Iterable[int] | None = None) -> dict[int, float]:
    """Saturated-CSMA airtime approximation: 1 / (largest clique containing i)."""
    aps = tuple(ap_set) if ap_set is not None else cg.ap_order
    if len(aps) > 25:
        raise ValueError(f"airtime_shares supports at most 25 APs, got {len(aps)}")
    idx = [cg.index(ap) for ap in aps]
    sub = cg.conflict[np.ix_(idx, idx)]
    n = len(aps)
    adj = [int(sum(1 << j for j in range(n) if sub[i, j])) for i in range(n)]
    omega = _largest_clique_membership(adj, n)
    return {ap: 1.0 / omega[i] for i, ap in enumerate(aps)}


# ---------------------------------------------------------------------------
# SINR and rate mapping
# ---------------------------------------------------------------------------

def sinr_to_phy_rate(sinr_db: float, table: RateTable | None = None) -> float:
    t = table or DEFAULT_RATE_TABLE
    idx = int(np.searchsorted(t.sinr_thresholds_db, sinr_db, side="right")) - 1
    return 0.0 if idx < 0 else t.phy_rates_mbps[idx]


def sinr_db(
    sta: int,
    serving_ap: int,
    concurrent_interferers: Iterable[int],
    topology: Topology,
    joint: JointConfiguration,
    params: OracleParams | None = None,
) -> float:
    """Signal over noise plus the summed power of concurrently active APs."""
    p = params or OracleParams()
    sta_pos = topology.sta_node(sta).position
    pl = path_loss(topology.ap_node(serving_ap).position, sta_pos, topology.building, p.path_loss)
    signal_mw = _dbm_to_mw(received_power(joint.per_ap[serving_ap].tx_pwr, pl))
    denom_mw = _dbm_to_mw(p.noise_floor_dbm)
    for ap in concurrent_interferers:
        if ap == serving_ap:
            continue
        pl_i = path_loss(topology.ap_node(ap).position, sta_pos, topology.building, p.path_loss)
        denom_mw += _dbm_to_mw(received_power(joint.per_ap[ap].tx_pwr, pl_i))
    return float(10.0 * math.log10(signal_mw / denom_mw))


# ---------------------------------------------------------------------------
# Oracle with cached geometry
# ---------------------------------------------------------------------------

class ChannelOracle:
    """Evaluates joint configurations against a fixed topology.

    Precomputes AP-AP and AP-STA path losses once; each :meth:`evaluate` is
    then a handful of vectorized array operations plus an exact clique search.
    """

    def __init__(self, topology: Topology, params: OracleParams | None = None):
        self.topology = topology
        self.params = params or OracleParams()
        self.ap_order = topology.ap_ids
        self.sta_order = topology.sta_ids
        self._ap_pos = [topology.ap_node(ap).position for ap in self.ap_order]
        self._sta_pos = [topology.sta_node(s).position for s in self.sta_order]
        b, pl = topology.building, self.params.path_loss
        n, s = len(self.ap_order), len(self.sta_order)
        self.pl_ap_ap = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                v = path_loss(self._ap_pos[i], self._ap_pos[j], b, pl)
                self.pl_ap_ap[i, j] = self.pl_ap_ap[j, i] = v
        self.pl_ap_sta = np.zeros((n, s))
        for i in range(n):
            for j in range(s):
                self.pl_ap_sta[i, j] = path_loss(self._ap_pos[i], self._sta_pos[j], b, pl)
        self._serving = np.array(
            [self.ap_order.index(topology.association[sta]) for sta in self.sta_order], dtype=int
        )
        self._sta_counts = np.array(
            [max(len(topology.stas_by_ap[ap]), 1) for ap in self.ap_order], dtype=float
        )

    def _vectors(self, joint: JointConfiguration) -> tuple[np.ndarray, np.ndarray]:
        if not joint.covers(self.ap_order):
            raise ValueError("joint configuration must cover every AP in the topology")
        return joint.arrays(self.ap_order)

    def conflict_graph(self, joint: JointConfiguration) -> ConflictGraph:
        obss, tx = self._vectors(joint)
        n = len(self.ap_order)
        rx = tx[:, None] - self.pl_ap_ap  # rx[i, j]: power of i heard at j
        defers = rx.T >= obss[:, None]  # defers[j, i]
        np.fill_diagonal(defers, False)
        conflict = defers | defers.T
        return ConflictGraph(self.ap_order, defers, conflict)

    def evaluate(self, joint: JointConfiguration) -> ThroughputReport:
        obss, tx = self._vectors(joint)
        cg = self.conflict_graph(joint)
        shares = airtime_shares(cg)
        share_vec = np.array([shares[ap] for ap in self.ap_order])

        p = self.params
        signal_dbm = tx[self._serving] - self.pl_ap_sta[self._serving, np.arange(len(self.sta_order))]
        rx_mw = _dbm_to_mw(tx[:, None] - self.pl_ap_sta)  # power of each AP at each STA
        concurrent = ~cg.conflict  # concurrent[k, i]: k transmits while i does
        np.fill_diagonal(concurrent, False)
        interference_mw = (concurrent.astype(float).T @ rx_mw)[self._serving, np.arange(len(self.sta_order))]
        sinr = signal_dbm - 10.0 * np.log10(_dbm_to_mw(p.noise_floor_dbm) + interference_mw)

        idx = np.searchsorted(p.rate_table.sinr_thresholds_db, sinr, side="right") - 1
        rates = np.where(idx >= 0, np.asarray(p.rate_table.phy_rates_mbps)[np.maximum(idx, 0)], 0.0)
        per_link = (
            share_vec[self._serving]
            * p.rate_table.mac_efficiency
            * rates
            / self._sta_counts[self._serving]
        )
        thr = np.minimum(p.offered_downlink_mbps, per_link)
        per_sta = {sta: float(thr[j]) for j, sta in enumerate(self.sta_order)}
        per_ap = {ap: float(share_vec[i]) for i, ap in enumerate(self.ap_order)}
        return ThroughputReport(per_sta, per_ap)

    def attainable(self) -> dict[int, float]:
        """Per-STA throughput with all other APs removed and defaults applied."""
        out: dict[int, float] = {}
        for ap in self.ap_order:
            sub = self.topology.subset([ap])
            solo = ChannelOracle(sub, self.params)
            report = solo.evaluate(JointConfiguration.uniform([ap], self.params.default_config))
            out.update(report.per_sta)
        return out


# Module-level spec surface; each call builds a fresh oracle for the topology.

def conflict_graph(
    topology: Topology, joint: JointConfiguration, params: OracleParams | None = None
) -> ConflictGraph:
    return ChannelOracle(topology, params).conflict_graph(joint)


def evaluate_throughput(
    topology: Topology, joint: JointConfiguration, params: OracleParams | None = None
) -> ThroughputReport:
    return ChannelOracle(topology, params).evaluate(joint)


def attainable_throughput(topology: Topology, params: OracleParams | None = None) -> dict[int, float]:
    return ChannelOracle(topology, params).attainable()
