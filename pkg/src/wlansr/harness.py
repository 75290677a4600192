"""Experiment driver: strategy x topology x seed grids with CSV outputs.

Each seeded run is fully isolated and bit-reproducible. Regret needs a
reference reward that is unknowable a priori, so per-seed runs record raw
rewards and regret is filled in a post-pass against the best normalized
reward observed in the experiment; changing that reference shifts every
run's regret curve by the same per-round constant.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .agents import STRATEGIES, RoundOrchestrator, build_agents
from .channel import ChannelOracle, OracleParams
from .metrics import MetricsRecord, cumulative_regret, ema, quartiles
from .topology import (
    NeighborhoodMap,
    Topology,
    compute_neighborhoods,
    generate_apartment_topology,
    generate_office_topology,
    load_topology_file,
)

CSV_COLUMNS = ("seed", "iter", "reward", "norm_reward", "regret", "starving", "cum_throughput_mbps")
QUARTILE_METRICS = ("norm_reward", "regret", "starving", "cum_throughput_mbps")
BUNDLED_TOPOLOGIES = {"t1": "t1_office.json", "t2": "t2_apartment.json"}


@dataclass
class ExperimentConfig:
    topology: str
    strategy: str
    iterations: int = 400
    seeds: int = 22
    delta_t_ms: float = 75.0
    out_dir: str = "runs"
    oracle_overrides: Mapping[str, float] = field(default_factory=dict)
    loss_prob: float = 0.0
    ema_alpha: float = 0.04
    jobs: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        return cls(
            topology=doc["topology"],
            strategy=doc["strategy"],
            iterations=int(doc.get("iters", 400)),
            seeds=int(doc.get("seeds", 22)),
            delta_t_ms=float(doc.get("delta_t_ms", 75.0)),
            out_dir=str(doc.get("out", "runs")),
            oracle_overrides=dict(doc.get("oracle_params", {})),
            loss_prob=float(doc.get("loss_prob", 0.0)),
            ema_alpha=float(doc.get("ema_alpha", 0.04)),
            jobs=int(doc.get("jobs", 1)),
        )


def bundled_topology_path(name: str) -> Path:
    return Path(str(resources.files("wlansr").joinpath("data", BUNDLED_TOPOLOGIES[name])))


def _parse_kv(spec: str) -> dict[str, str]:
    out = {}
    if spec:
        for item in spec.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"expected key=value, got {item!r}")
            out[key.strip()] = value.strip()
    return out


def select_spread_aps(topology: Topology, count: int, seed: int = 0) -> Topology:
    """Greedy max-min-distance subset, a stand-in for channel allocation."""
    if count > topology.n_aps:
        raise ValueError(f"cannot select {count} APs from {topology.n_aps}")
    rng = np.random.default_rng(seed)
    ids = list(topology.ap_ids)
    pos = {ap: np.asarray(topology.ap_node(ap).position) for ap in ids}
    chosen = [ids[int(rng.integers(len(ids)))]]
    while len(chosen) < count:
        best, best_dist = None, -1.0
        for ap in ids:
            if ap in chosen:
                continue
            dist = min(float(np.linalg.norm(pos[ap] - pos[c])) for c in chosen)
            if dist > best_dist:
                best, best_dist = ap, dist
        chosen.append(best)
    return topology.subset(chosen)


def resolve_topology(spec: str) -> Topology:
    """A file path, a bundled name (t1/t2), or a generator spec.

    Generator specs:
      gen:office:aps=10,stas=5,width=50,height=30,seed=7[,radius=10][,room=10]
      gen:apartment:floors=9,per_floor=24,stas=4,seed=3[,select=14]
    """
    if spec in BUNDLED_TOPOLOGIES:
        return load_topology_file(bundled_topology_path(spec))
    if spec.startswith("gen:"):
        parts = spec.split(":", 2)
        kind = parts[1] if len(parts) > 1 else ""
        kv = _parse_kv(parts[2] if len(parts) > 2 else "")
        if kind == "office":
            return generate_office_topology(
                int(kv.get("aps", 10)),
                int(kv.get("stas", 5)),
                (float(kv.get("width", 50)), float(kv.get("height", 30))),
                int(kv.get("seed", 0)),
                sta_radius=float(kv.get("radius", 10)),
                room_size=float(kv["room"]) if "room" in kv else None,
            )
        if kind == "apartment":
            topo = generate_apartment_topology(
                int(kv.get("floors", 9)),
                int(kv.get("per_floor", 24)),
                int(kv.get("stas", 4)),
                int(kv.get("seed", 0)),
            )
            if "select" in kv:
                topo = select_spread_aps(topo, int(kv["select"]), int(kv.get("seed", 0)))
            return topo
        raise ValueError(f"unknown generator kind {kind!r}")
    return load_topology_file(spec)


# ---------------------------------------------------------------------------
# Seeded runs
# ---------------------------------------------------------------------------

@dataclass
class SeedRun:
    seed: int
    records: list[MetricsRecord]
    round_seconds: np.ndarray


def run_seed(
    topology: Topology,
    neighborhoods: NeighborhoodMap,
    oracle: ChannelOracle,
    strategy: str,
    seed: int,
    iterations: int,
    loss_prob: float = 0.0,
) -> SeedRun:
    root = np.random.SeedSequence(seed)
    children = root.spawn(2)
    agents = build_agents(strategy, topology, neighborhoods, children[0])
    orchestrator = RoundOrchestrator(
        topology,
        neighborhoods,
        oracle,
        agents,
        loss_rng=np.random.default_rng(children[1]),
        loss_prob=loss_prob,
    )
    records, times = [], np.empty(iterations)
    for t in range(iterations):
        start = time.perf_counter()
        records.append(orchestrator.run_round())
        times[t] = time.perf_counter() - start
    return SeedRun(seed, records, times)


def _run_seed_task(args) -> SeedRun:
    topology, neighborhoods, oracle_params, strategy, seed, iterations, loss_prob = args
    oracle = ChannelOracle(topology, oracle_params)
    return run_seed(topology, neighborhoods, oracle, strategy, seed, iterations, loss_prob)


def fill_regret(per_seed: Mapping[int, Sequence[MetricsRecord]], reference: float) -> None:
    """Post-pass: set regret increments and cumulative regret in place."""
    for records in per_seed.values():
        regret = cumulative_regret([r.normalized_reward for r in records], reference)
        previous = 0.0
        for record, value in zip(records, regret):
            record.cumulative_regret = float(value)
            record.regret_increment = float(value - previous)
            previous = value


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    per_seed: dict[int, list[MetricsRecord]]
    reference: float
    wall_time_s: float
    round_seconds: dict[int, np.ndarray]
    metrics_csv: Path
    quartiles_csv: Path
    summary_json: Path


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    started = time.perf_counter()
    topology = resolve_topology(config.topology)
    oracle_params = OracleParams().with_overrides(config.oracle_overrides)
    neighborhoods = compute_neighborhoods(topology, path_loss_params=oracle_params.path_loss)
    oracle = ChannelOracle(topology, oracle_params)

    seeds = list(range(config.seeds))
    if config.jobs > 1:
        tasks = [
            (topology, neighborhoods, oracle_params, config.strategy, s, config.iterations, config.loss_prob)
            for s in seeds
        ]
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            runs = list(pool.map(_run_seed_task, tasks))
    else:
        runs = [
            run_seed(topology, neighborhoods, oracle, config.strategy, s, config.iterations, config.loss_prob)
            for s in seeds
        ]

    per_seed = {run.seed: run.records for run in sorted(runs, key=lambda r: r.seed)}
    reference = max(r.normalized_reward for records in per_seed.values() for r in records)
    fill_regret(per_seed, reference)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_csv = out_dir / "metrics.csv"
    quartiles_csv = out_dir / "quartiles.csv"
    summary_json = out_dir / "summary.json"
    write_metrics_csv(metrics_csv, per_seed)
    write_quartiles_csv(quartiles_csv, per_seed, config.ema_alpha)

    wall = time.perf_counter() - started
    final_regret = {s: records[-1].cumulative_regret for s, records in per_seed.items()}
    last50 = {
        s: float(np.median([r.normalized_reward for r in records[-50:]]))
        for s, records in per_seed.items()
    }
    summary = {
        "strategy": config.strategy,
        "topology": config.topology,
        "iterations": config.iterations,
        "seeds": config.seeds,
        "loss_prob": config.loss_prob,
        "simulated_duration_s": config.iterations * config.delta_t_ms / 1000.0,
        "regret_reference": reference,
        "final_cumulative_regret_median": float(np.median(list(final_regret.values()))),
        "final_cumulative_regret_per_seed": final_regret,
        "median_last50_norm_reward": float(np.median(list(last50.values()))),
        "total_wall_time_s": wall,
    }
    summary_json.write_text(json.dumps(summary, indent=2, sort_keys=True))

    return ExperimentResult(
        config=config,
        per_seed=per_seed,
        reference=reference,
        wall_time_s=wall,
        round_seconds={run.seed: run.round_seconds for run in runs},
        metrics_csv=metrics_csv,
        quartiles_csv=quartiles_csv,
        summary_json=summary_json,
    )


# ---------------------------------------------------------------------------
# CSV I/O (repr-formatted floats round-trip exactly)
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def write_metrics_csv(path, per_seed: Mapping[int, Sequence[MetricsRecord]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for seed in sorted(per_seed):
            for r in per_seed[seed]:
                writer.writerow(
                    [
                        seed,
                        r.iteration,
                        _fmt(r.global_reward),
                        _fmt(r.normalized_reward),
                        _fmt(r.cumulative_regret),
                        r.starving_count,
                        _fmt(r.cumulated_throughput_mbps),
                    ]
                )


def read_metrics_csv(path) -> dict[int, list[MetricsRecord]]:
    per_seed: dict[int, list[MetricsRecord]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
        for row in reader:
            record = MetricsRecord(
                iteration=int(row["iter"]),
                global_reward=float(row["reward"]),
                normalized_reward=float(row["norm_reward"]),
                starving_count=int(row["starving"]),
                cumulated_throughput_mbps=float(row["cum_throughput_mbps"]),
                cumulative_regret=float(row["regret"]),
            )
            per_seed.setdefault(int(row["seed"]), []).append(record)
    for records in per_seed.values():
        previous = 0.0
        for r in records:
            r.regret_increment = r.cumulative_regret - previous
            previous = r.cumulative_regret
    return per_seed


def _metric_matrix(per_seed: Mapping[int, Sequence[MetricsRecord]], metric: str) -> np.ndarray:
    getters = {
        "norm_reward": lambda r: r.normalized_reward,
        "regret": lambda r: r.cumulative_regret,
        "starving": lambda r: float(r.starving_count),
        "cum_throughput_mbps": lambda r: r.cumulated_throughput_mbps,
        "reward": lambda r: r.global_reward,
    }
    get = getters[metric]
    return np.array([[get(r) for r in per_seed[s]] for s in sorted(per_seed)])


def write_quartiles_csv(path, per_seed, alpha: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "metric", "q1", "q2", "q3", "q1_ema", "q2_ema", "q3_ema"])
        for metric in QUARTILE_METRICS:
            matrix = _metric_matrix(per_seed, metric)
            q1, q2, q3 = quartiles(matrix)
            smooth = [ema(q, alpha) for q in (q1, q2, q3)]
            for t in range(matrix.shape[1]):
                writer.writerow(
                    [t + 1, metric]
                    + [_fmt(q[t]) for q in (q1, q2, q3)]
                    + [_fmt(sq[t]) for sq in smooth]
                )


def read_quartiles_csv(path) -> dict[str, dict[str, np.ndarray]]:
    rows: dict[str, dict[str, list[float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            bucket = rows.setdefault(row["metric"], {k: [] for k in ("q1", "q2", "q3", "q1_ema", "q2_ema", "q3_ema")})
            for key in bucket:
                bucket[key].append(float(row[key]))
    return {
        metric: {key: np.array(vals) for key, vals in bucket.items()}
        for metric, bucket in rows.items()
    }
