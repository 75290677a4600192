#!/usr/bin/env python3
"""Regenerate the bundled topology files.

T1: one office floor (50 x 30 m) partitioned into 10 x 10 m rooms, 10 APs on
a jittered grid with 5 STAs each placed within 5 m desks-around-the-AP.

T2: a nine-story apartment block (24 units of 5 x 5 m per floor, one AP and
4 STAs per unit), reduced to the 14 units that share one radio channel. The
unit list is a fixed allocation-style pattern: spread across floors but with
the vertical near-collisions a real allocator cannot always avoid.
"""

from pathlib import Path

from wlansr.topology import (
    generate_apartment_topology,
    generate_office_topology,
    topology_to_json,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "wlansr" / "data"

T2_UNITS = [
    (0, 0), (0, 13), (1, 7), (2, 0), (2, 18), (3, 10), (4, 3),
    (4, 21), (5, 14), (6, 6), (6, 23), (7, 11), (8, 2), (8, 17),
]


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    t1 = generate_office_topology(
        10, 5, (50.0, 30.0), seed=7, sta_radius=5.0, room_size=10.0
    )
    (DATA_DIR / "t1_office.json").write_text(topology_to_json(t1) + "\n")
    print(f"t1_office.json: {t1.n_aps} APs, {t1.n_stas} STAs")

    full = generate_apartment_topology(9, 24, 4, seed=3)
    t2 = full.subset(sorted(f * 24 + k for f, k in T2_UNITS))
    (DATA_DIR / "t2_apartment.json").write_text(topology_to_json(t2) + "\n")
    print(f"t2_apartment.json: {t2.n_aps} APs, {t2.n_stas} STAs")


if __name__ == "__main__":
    main()
