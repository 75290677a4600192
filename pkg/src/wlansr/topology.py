"""WLAN arrangements: nodes, buildings, radio neighborhoods, scenario generators.

Topologies are immutable after construction and safe to share across threads.
Positions are 3D coordinates in meters; power levels are dBm.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Configuration space boundaries (dBm, integer grid).
OBSS_PD_MIN, OBSS_PD_MAX = -82, -62
TX_PWR_MIN, TX_PWR_MAX = 1, 21

# Legacy fixed operating point: most sensitive carrier sense, full power.
DEFAULT_OBSS_PD = -82
DEFAULT_TX_PWR = 20


class TopologyError(ValueError):
    """A topology file failed to parse or violates a structural invariant."""


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or (not isinstance(value, int) and not float(value).is_integer()):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class Configuration:
    """One AP's (OBSS_PD, TX_PWR) operating point on the integer dBm grid."""

    obss_pd: int
    tx_pwr: int

    def __post_init__(self):
        object.__setattr__(self, "obss_pd", _as_int(self.obss_pd, "obss_pd"))
        object.__setattr__(self, "tx_pwr", _as_int(self.tx_pwr, "tx_pwr"))
        if not OBSS_PD_MIN <= self.obss_pd <= OBSS_PD_MAX:
            raise ValueError(f"obss_pd {self.obss_pd} outside [{OBSS_PD_MIN}, {OBSS_PD_MAX}]")
        if not TX_PWR_MIN <= self.tx_pwr <= TX_PWR_MAX:
            raise ValueError(f"tx_pwr {self.tx_pwr} outside [{TX_PWR_MIN}, {TX_PWR_MAX}]")

    def as_pair(self) -> tuple[float, float]:
        return (float(self.obss_pd), float(self.tx_pwr))


DEFAULT_CONFIG = Configuration(DEFAULT_OBSS_PD, DEFAULT_TX_PWR)


@dataclass(frozen=True)
class JointConfiguration:
    """A Configuration for every AP in a stated set."""

    per_ap: Mapping[int, Configuration]

    def __post_init__(self):
        object.__setattr__(self, "per_ap", dict(self.per_ap))

    @classmethod
    def uniform(cls, ap_ids: Iterable[int], config: Configuration) -> "JointConfiguration":
        return cls({ap: config for ap in ap_ids})

    def covers(self, ap_ids: Iterable[int]) -> bool:
        return set(self.per_ap) == set(ap_ids)

    def restrict(self, ap_ids: Iterable[int]) -> dict[int, Configuration]:
        return {ap: self.per_ap[ap] for ap in ap_ids}

    def arrays(self, order: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """(obss_pd, tx_pwr) vectors following the given AP order."""
        obss = np.array([self.per_ap[ap].obss_pd for ap in order], dtype=float)
        tx = np.array([self.per_ap[ap].tx_pwr for ap in order], dtype=float)
        return obss, tx


@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # "AP" or "STA"
    position: tuple[float, float, float]

    def __post_init__(self):
        if self.kind not in ("AP", "STA"):
            raise ValueError(f"node kind must be AP or STA, got {self.kind!r}")
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise ValueError(f"node {self.id}: position must be 3 finite coordinates")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class Building:
    """Axis-aligned wall segments plus floor structure.

    Each wall is (x1, y1, x2, y2, floor) and spans the full height of its floor.
    """

    wall_planes: tuple[tuple[float, float, float, float, int], ...] = ()
    floor_height: float = 3.0
    floor_count: int = 1

    def __post_init__(self):
        if self.floor_height <= 0:
            raise ValueError("floor_height must be > 0")
        if self.floor_count < 1:
            raise ValueError("floor_count must be >= 1")
        walls = []
        for w in self.wall_planes:
            x1, y1, x2, y2, f = w
            if x1 != x2 and y1 != y2:
                raise ValueError(f"wall {w} is not axis-aligned")
            walls.append((float(x1), float(y1), float(x2), float(y2), int(f)))
        object.__setattr__(self, "wall_planes", tuple(walls))

    def floor_index(self, z: float) -> int:
        return min(max(int(z // self.floor_height), 0), self.floor_count - 1)


@dataclass(frozen=True)
class Topology:
    aps: tuple[Node, ...]
    stas: tuple[Node, ...]
    association: Mapping[int, int]  # STA id -> AP id
    building: Building = field(default_factory=Building)

    def __post_init__(self):
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "stas", tuple(self.stas))
        object.__setattr__(self, "association", dict(self.association))
        ap_ids = [n.id for n in self.aps]
        sta_ids = [n.id for n in self.stas]
        if len(set(ap_ids)) != len(ap_ids):
            raise TopologyError("field aps: duplicate AP ids")
        if len(set(sta_ids)) != len(sta_ids):
            raise TopologyError("field stas: duplicate STA ids")
        if set(self.association) != set(sta_ids):
            raise TopologyError("field association: must map every STA to exactly one AP")
        unknown = {ap for ap in self.association.values() if ap not in set(ap_ids)}
        if unknown:
            raise TopologyError(f"field association: unknown AP ids {sorted(unknown)}")

    @cached_property
    def ap_ids(self) -> tuple[int, ...]:
        return tuple(sorted(n.id for n in self.aps))

    @cached_property
    def sta_ids(self) -> tuple[int, ...]:
        return tuple(sorted(n.id for n in self.stas))

    @cached_property
    def stas_by_ap(self) -> dict[int, tuple[int, ...]]:
        by_ap: dict[int, list[int]] = {ap: [] for ap in self.ap_ids}
        for sta in self.sta_ids:
            by_ap[self.association[sta]].append(sta)
        return {ap: tuple(stas) for ap, stas in by_ap.items()}

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_stas(self) -> int:
        return len(self.stas)

    def ap_node(self, ap_id: int) -> Node:
        return self._ap_index[ap_id]

    def sta_node(self, sta_id: int) -> Node:
        return self._sta_index[sta_id]

    @cached_property
    def _ap_index(self) -> dict[int, Node]:
        return {n.id: n for n in self.aps}

    @cached_property
    def _sta_index(self) -> dict[int, Node]:
        return {n.id: n for n in self.stas}

    def subset(self, ap_ids: Iterable[int]) -> "Topology":
        """Sub-topology keeping the given APs, their STAs, and the building."""
        keep = set(ap_ids)
        missing = keep - set(self.ap_ids)
        if missing:
            raise TopologyError(f"subset: unknown AP ids {sorted(missing)}")
        aps = tuple(n for n in self.aps if n.id in keep)
        stas = tuple(n for n in self.stas if self.association[n.id] in keep)
        assoc = {n.id: self.association[n.id] for n in stas}
        return Topology(aps, stas, assoc, self.building)


@dataclass(frozen=True)
class NeighborhoodMap:
    """Per-AP communication neighborhoods; each AP is a member of its own set."""

    neighbors: Mapping[int, frozenset[int]]

    def __post_init__(self):
        fixed = {ap: frozenset(vals) for ap, vals in dict(self.neighbors).items()}
        object.__setattr__(self, "neighbors", fixed)
        for ap, group in self.neighbors.items():
            if ap not in group:
                raise ValueError(f"AP {ap} missing from its own neighborhood")
            for other in group:
                if ap not in self.neighbors.get(other, frozenset()):
                    raise ValueError(f"asymmetric neighborhoods: {other} in N_{ap} but not vice versa")

    @property
    def degenerate(self) -> bool:
        """True when every neighborhood is a singleton (nothing to coordinate)."""
        return all(len(group) == 1 for group in self.neighbors.values())

    def of(self, ap: int) -> frozenset[int]:
        return self.neighbors[ap]

    def sizes(self) -> dict[int, int]:
        return {ap: len(group) for ap, group in self.neighbors.items()}


def compute_neighborhoods(
    topology: Topology,
    default_config: Configuration = DEFAULT_CONFIG,
    path_loss_params=None,
) -> NeighborhoodMap:
    """Group APs that can hear each other's beacons under the default config.

    AP j neighbors AP i when i's beacon, sent at the default transmit power,
    arrives at j at or above j's default sensing threshold. The relation is
    symmetrized by union so consensus messages always flow both ways.
    """
    from . import channel  # local import: channel depends on topology types

    params = path_loss_params if path_loss_params is not None else channel.PathLossParams()
    neighbors: dict[int, set[int]] = {ap.id: {ap.id} for ap in topology.aps}
    for i, a in enumerate(topology.aps):
        for b in topology.aps[i + 1:]:
            pl = channel.path_loss(a.position, b.position, topology.building, params)
            rx = channel.received_power(default_config.tx_pwr, pl)
            if rx >= default_config.obss_pd:
                neighbors[a.id].add(b.id)
                neighbors[b.id].add(a.id)
    result = NeighborhoodMap({ap: frozenset(group) for ap, group in neighbors.items()})
    if result.degenerate and topology.n_aps > 1:
        logger.warning("all neighborhoods are singletons; spatial reuse is already maximal")
    return result


# ---------------------------------------------------------------------------
# Topology file I/O (JSON schema: aps, stas, building)
# ---------------------------------------------------------------------------

def load_topology(text: str) -> Topology:
    """Parse topology-file content, validating all structural invariants."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise TopologyError("topology document must be a JSON object")
    for key in ("aps", "stas", "building"):
        if key not in doc:
            raise TopologyError(f"field {key}: missing")
    try:
        aps = tuple(Node(_as_int(a["id"], "ap id"), "AP", tuple(a["pos"])) for a in doc["aps"])
        stas = tuple(Node(_as_int(s["id"], "sta id"), "STA", tuple(s["pos"])) for s in doc["stas"])
        assoc = {_as_int(s["id"], "sta id"): _as_int(s["ap"], "sta ap") for s in doc["stas"]}
        bld = doc["building"]
        building = Building(
            wall_planes=tuple(tuple(w) for w in bld.get("walls", [])),
            floor_height=float(bld["floor_height"]),
            floor_count=_as_int(bld["floors"], "building floors"),
        )
    except TopologyError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise TopologyError(f"invalid topology document: {exc}") from exc
    return Topology(aps, stas, assoc, building)


def load_topology_file(path) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        return load_topology(fh.read())


def topology_to_json(topology: Topology) -> str:
    doc = {
        "aps": [{"id": n.id, "pos": list(n.position)} for n in topology.aps],
        "stas": [
            {"id": n.id, "pos": list(n.position), "ap": topology.association[n.id]}
            for n in topology.stas
        ],
        "building": {
            "walls": [list(w) for w in topology.building.wall_planes],
            "floor_height": topology.building.floor_height,
            "floors": topology.building.floor_count,
        },
    }
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# Scenario generators
# ---------------------------------------------------------------------------

def _grid_dims(count: int, aspect: float = 1.0) -> tuple[int, int]:
    """Near-square (cols, rows) with cols*rows >= count, cols/rows ~ aspect."""
    rows = max(1, round(math.sqrt(count / max(aspect, 1e-9))))
    cols = math.ceil(count / rows)
    return cols, rows


def _sample_in_disc(rng: np.random.Generator, center, radius: float, rect, z: float):
    """Uniform point in a disc, rejection-clipped into the floor rectangle."""
    x0, y0, x1, y1 = rect
    for _ in range(64):
        r = radius * math.sqrt(rng.uniform())
        theta = rng.uniform(0.0, 2.0 * math.pi)
        x = center[0] + r * math.cos(theta)
        y = center[1] + r * math.sin(theta)
        if x0 <= x <= x1 and y0 <= y <= y1:
            return (x, y, z)
    return (min(max(center[0], x0), x1), min(max(center[1], y0), y1), z)


def generate_office_topology(
    ap_count: int,
    stas_per_ap: int,
    floor_dims: tuple[float, float] = (50.0, 30.0),
    seed: int = 0,
    *,
    sta_radius: float = 10.0,
    room_size: float | None = None,
    floor_height: float = 3.0,
) -> Topology:
    """Single-floor office: APs on a jittered grid, STAs in discs around them.

    ``room_size`` adds interior partition walls on a square grid of that pitch,
    which sparsifies neighborhoods the way real office dividers do.
    """
    if ap_count < 1:
        raise ValueError("ap_count must be >= 1")
    if stas_per_ap < 0:
        raise ValueError("stas_per_ap must be >= 0")
    width, depth = float(floor_dims[0]), float(floor_dims[1])
    if width <= 0 or depth <= 0:
        raise ValueError("floor_dims must be positive")
    rng = np.random.default_rng(seed)
    cols, rows = _grid_dims(ap_count, aspect=width / depth)
    cell_w, cell_d = width / cols, depth / rows

    aps = []
    for k in range(ap_count):
        cx = (k % cols + 0.5) * cell_w
        cy = (k // cols + 0.5) * cell_d
        x = cx + rng.uniform(-cell_w / 4, cell_w / 4)
        y = cy + rng.uniform(-cell_d / 4, cell_d / 4)
        aps.append(Node(k, "AP", (x, y, 2.5)))

    rect = (0.0, 0.0, width, depth)
    stas, assoc = [], {}
    next_id = ap_count
    for ap in aps:
        for _ in range(stas_per_ap):
            pos = _sample_in_disc(rng, ap.position, sta_radius, rect, 1.0)
            stas.append(Node(next_id, "STA", pos))
            assoc[next_id] = ap.id
            next_id += 1

    walls: list[tuple[float, float, float, float, int]] = []
    if room_size:
        k = 1
        while k * room_size < width - 1e-9:
            walls.append((k * room_size, 0.0, k * room_size, depth, 0))
            k += 1
        k = 1
        while k * room_size < depth - 1e-9:
            walls.append((0.0, k * room_size, width, k * room_size, 0))
            k += 1

    building = Building(tuple(walls), floor_height, 1)
    return Topology(tuple(aps), tuple(stas), assoc, building)


def generate_apartment_topology(
    floors: int,
    apartments_per_floor: int,
    stas_per_ap: int,
    seed: int = 0,
    *,
    apartment_size: float = 5.0,
    floor_height: float = 3.0,
) -> Topology:
    """Multi-story residential block: one AP per apartment, walls on boundaries.

    Apartments tile each floor on a near-square grid of ``apartment_size``
    squares; every AP and its STAs are placed uniformly inside one apartment.
    """
    if floors < 1 or apartments_per_floor < 1:
        raise ValueError("floors and apartments_per_floor must be >= 1")
    if stas_per_ap < 0:
        raise ValueError("stas_per_ap must be >= 0")
    rng = np.random.default_rng(seed)
    cols, rows = _grid_dims(apartments_per_floor)
    a = apartment_size

    aps, stas, assoc = [], [], {}
    ap_count = floors * apartments_per_floor
    next_sta = ap_count
    for f in range(floors):
        z0 = f * floor_height
        for k in range(apartments_per_floor):
            ap_id = f * apartments_per_floor + k
            cx, cy = (k % cols) * a, (k // cols) * a
            x = cx + rng.uniform(0.3, a - 0.3)
            y = cy + rng.uniform(0.3, a - 0.3)
            aps.append(Node(ap_id, "AP", (x, y, z0 + 2.5)))
            for _ in range(stas_per_ap):
                sx = cx + rng.uniform(0.2, a - 0.2)
                sy = cy + rng.uniform(0.2, a - 0.2)
                stas.append(Node(next_sta, "STA", (sx, sy, z0 + 1.2)))
                assoc[next_sta] = ap_id
                next_sta += 1

    walls: list[tuple[float, float, float, float, int]] = []
    for f in range(floors):
        for i in range(1, cols):
            walls.append((i * a, 0.0, i * a, rows * a, f))
        for j in range(1, rows):
            walls.append((0.0, j * a, cols * a, j * a, f))

    building = Building(tuple(walls), floor_height, floors)
    return Topology(tuple(aps), tuple(stas), assoc, building)
