"""Shared helpers: small random scenarios for property-style checks."""

import numpy as np
import pytest

from wlansr.topology import Configuration, JointConfiguration, Node, Building, Topology


def random_topology(rng: np.random.Generator, max_aps: int = 8, max_stas_per_ap: int = 3) -> Topology:
    """A small random single-floor arrangement with at least one AP."""
    n_aps = int(rng.integers(1, max_aps + 1))
    aps = []
    for i in range(n_aps):
        aps.append(Node(i, "AP", (float(rng.uniform(0, 60)), float(rng.uniform(0, 40)), 2.5)))
    stas, assoc = [], {}
    next_id = n_aps
    for ap in aps:
        for _ in range(int(rng.integers(0, max_stas_per_ap + 1))):
            offset = rng.uniform(-8, 8, size=2)
            stas.append(
                Node(next_id, "STA", (ap.position[0] + offset[0], ap.position[1] + offset[1], 1.0))
            )
            assoc[next_id] = ap.id
            next_id += 1
    return Topology(tuple(aps), tuple(stas), assoc, Building())


def random_joint(rng: np.random.Generator, topology: Topology) -> JointConfiguration:
    return JointConfiguration(
        {
            ap: Configuration(int(rng.integers(-82, -61)), int(rng.integers(1, 22)))
            for ap in topology.ap_ids
        }
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
