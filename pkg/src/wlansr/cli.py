"""Command-line entry points: run experiments, render report figures."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ExperimentConfig, QUARTILE_METRICS, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlansr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one strategy over seeded replications")
    run.add_argument("--topology", help="topology file, bundled name (t1/t2), or gen:... spec")
    run.add_argument("--strategy", help="inspire | default | dsc | thompson")
    run.add_argument("--iters", type=int, help="rounds per replication (default 400)")
    run.add_argument("--seeds", type=int, help="number of replications (default 22)")
    run.add_argument("--out", help="output directory (default runs)")
    run.add_argument(
        "--oracle-param",
        action="append",
        default=[],
        metavar="K=V",
        help="override an oracle parameter (repeatable)",
    )
    run.add_argument("--loss-prob", type=float, help="per-message drop probability (default 0)")
    run.add_argument("--jobs", type=int, help="parallel seed workers (default 1)")
    run.add_argument("--config", help="JSON file mirroring the flags; flags win")

    report = sub.add_parser("report", help="render quartile figures from run directories")
    report.add_argument("--runs", nargs="+", required=True, help="run output directories")
    report.add_argument("--out", default="figures", help="directory for the PNG files")
    report.add_argument("--metrics", nargs="+", choices=QUARTILE_METRICS)
    report.add_argument("--raw", action="store_true", help="plot unsmoothed quartiles")
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    overrides = dict(base.get("oracle_params", {}))
    for item in args.oracle_param:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--oracle-param expects K=V, got {item!r}")
        overrides[key] = float(value)

    def pick(flag, key, default):
        return flag if flag is not None else base.get(key, default)

    topology = pick(args.topology, "topology", None)
    strategy = pick(args.strategy, "strategy", None)
    if topology is None or strategy is None:
        raise SystemExit("run requires --topology and --strategy (or a --config providing them)")
    return ExperimentConfig(
        topology=topology,
        strategy=strategy,
        iterations=pick(args.iters, "iters", 400),
        seeds=pick(args.seeds, "seeds", 22),
        out_dir=pick(args.out, "out", "runs"),
        oracle_overrides=overrides,
        loss_prob=pick(args.loss_prob, "loss_prob", 0.0),
        jobs=pick(args.jobs, "jobs", 1),
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        try:
            config = _config_from_args(args)
        except ValueError as exc:
            raise SystemExit(str(exc))
        result = run_experiment(config)
        print(f"wrote {result.metrics_csv}")
        print(f"wrote {result.quartiles_csv}")
        print(f"wrote {result.summary_json}")
        print(
            f"median final cumulative regret: "
            f"{json.loads(result.summary_json.read_text())['final_cumulative_regret_median']:.4f}"
        )
        return 0
    if args.command == "report":
        from .plotting import render_report

        written = render_report(args.runs, args.out, args.metrics, smoothed=not args.raw)
        for path in written:
            print(f"wrote {path}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
