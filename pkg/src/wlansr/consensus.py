"""Aggregation of overlapping per-neighborhood prescriptions.

Each AP receives one proposed configuration from every neighbor whose
neighborhood covers it; the applied configuration is the weighted marginal
median of those proposals, computed per dimension on the raw (continuous)
values and rounded onto the grid once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .acquisition import round_to_grid
from .topology import Configuration, JointConfiguration


@dataclass(frozen=True)
class Prescription:
    """One AP's proposed (obss_pd, tx_pwr) pairs for its whole neighborhood."""

    author: int
    targets: Mapping[int, tuple[float, float]]

    def __post_init__(self):
        object.__setattr__(
            self, "targets", {ap: (float(a), float(b)) for ap, (a, b) in dict(self.targets).items()}
        )
        if self.author not in self.targets:
            raise ValueError(f"prescription from AP {self.author} must cover its author")


@dataclass(frozen=True)
class ConsensusWeights:
    weight: Mapping[int, float]

    def __post_init__(self):
        w = {ap: float(v) for ap, v in dict(self.weight).items()}
        if any(v < 0 for v in w.values()):
            raise ValueError("weights must be >= 0")
        object.__setattr__(self, "weight", w)

    def normalized(self, authors: Sequence[int]) -> dict[int, float]:
        total = sum(self.weight[a] for a in authors)
        if total <= 0:
            raise ValueError("weights over the received prescriptions must not all be zero")
        return {a: self.weight[a] / total for a in authors}


def weighted_median_1d(values: Sequence[float], weights: Sequence[float]) -> float:
    """Smallest received value v such that the weight strictly above v no
    longer outweighs the weight at or below it.

    Walking the sorted values, the objective sum of weighted absolute gaps
    decreases while (weight above k) - (weight up to k) stays positive and
    starts increasing once it goes negative; a zero difference means two
    equal-cost minimizers, of which the smaller is returned.
    """
    vals = np.asarray(values, dtype=float)
    wts = np.asarray(weights, dtype=float)
    if len(vals) == 0 or len(vals) != len(wts):
        raise ValueError("need matching, nonempty values and weights")
    if np.any(wts < 0) or not np.any(wts > 0):
        raise ValueError("weights must be >= 0 and not all zero")
    order = np.argsort(vals, kind="stable")
    vals, wts = vals[order], wts[order]
    total = wts.sum()
    upto = np.cumsum(wts)
    for k in range(len(vals)):
        if (total - upto[k]) - upto[k] <= 0.0:
            return float(vals[k])
    return float(vals[-1])


def weighted_marginal_median(
    per_dimension: Sequence[Sequence[tuple[float, float]]],
) -> Configuration:
    """Per-dimension weighted median of (value, weight) pairs, grid-rounded."""
    raw = weighted_marginal_median_raw(per_dimension)
    if len(raw) != 2:
        raise ValueError("a configuration has exactly two dimensions")
    return round_to_grid(raw)[0]


def weighted_marginal_median_raw(
    per_dimension: Sequence[Sequence[tuple[float, float]]],
) -> np.ndarray:
    if not per_dimension or any(len(dim) == 0 for dim in per_dimension):
        raise ValueError("at least one prescription required per dimension")
    return np.array(
        [weighted_median_1d([v for v, _ in dim], [w for _, w in dim]) for dim in per_dimension]
    )


def consensus_for_ap(
    ap: int,
    prescriptions: Sequence[Prescription],
    weights: Mapping[int, float] | None = None,
) -> tuple[np.ndarray, Configuration]:
    """Aggregate the prescriptions covering ``ap``; returns (raw, rounded).

    Weights default to equal; they are normalized over the authors actually
    present, so lost messages only reduce the voter set.
    """
    covering = [p for p in prescriptions if ap in p.targets]
    if not covering:
        raise ValueError(f"no prescription covers AP {ap}")
    if weights is None:
        w = {p.author: 1.0 for p in covering}
    else:
        w = ConsensusWeights(weights).normalized([p.author for p in covering])
    per_dim = [
        [(p.targets[ap][d], w[p.author]) for p in covering]
        for d in range(2)
    ]
    raw = weighted_marginal_median_raw(per_dim)
    return raw, round_to_grid(raw)[0]


def psi_objective(
    candidate: JointConfiguration | Mapping[int, tuple[float, float]],
    prescriptions: Sequence[Prescription],
    lipschitz_weights: Mapping[int, float] | None = None,
) -> float:
    """Weighted sum over prescriptions of L1 gaps to the candidate.

    This is the consensus-quality bound the marginal median minimizes; it is
    a testing oracle, not part of the per-round hot path.
    """
    if isinstance(candidate, JointConfiguration):
        cand = {ap: cfg.as_pair() for ap, cfg in candidate.per_ap.items()}
    else:
        cand = {ap: (float(a), float(b)) for ap, (a, b) in candidate.items()}
    total = 0.0
    for p in prescriptions:
        weight = 1.0 if lipschitz_weights is None else float(lipschitz_weights[p.author])
        for ap, pair in p.targets.items():
            if ap not in cand:
                raise ValueError(f"candidate does not cover prescribed AP {ap}")
            total += weight * (abs(pair[0] - cand[ap][0]) + abs(pair[1] - cand[ap][1]))
    return total
