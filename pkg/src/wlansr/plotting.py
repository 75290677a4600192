"""Render quartile-band figures from experiment output directories."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import QUARTILE_METRICS, read_quartiles_csv

METRIC_LABELS = {
    "norm_reward": "normalized global reward",
    "regret": "cumulative regret",
    "starving": "starving STAs",
    "cum_throughput_mbps": "cumulated throughput (Mbps)",
}


def _run_label(run_dir: Path) -> str:
    summary = run_dir / "summary.json"
    if summary.exists():
        doc = json.loads(summary.read_text())
        return str(doc.get("strategy", run_dir.name))
    return run_dir.name


def render_report(
    run_dirs: Sequence[str | Path],
    out_dir: str | Path,
    metrics: Sequence[str] | None = None,
    smoothed: bool = True,
) -> list[Path]:
    """One figure per metric: median line with an interquartile band per run.

    Expects each run directory to contain the quartiles.csv written by
    :func:`wlansr.harness.run_experiment`. Returns the written file paths.
    """
    run_dirs = [Path(d) for d in run_dirs]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = tuple(metrics or QUARTILE_METRICS)
    suffix = ("q1_ema", "q2_ema", "q3_ema") if smoothed else ("q1", "q2", "q3")

    written = []
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        for run_dir in run_dirs:
            data = read_quartiles_csv(run_dir / "quartiles.csv")
            if metric not in data:
                continue
            lo, mid, hi = (data[metric][k] for k in suffix)
            steps = range(1, len(mid) + 1)
            (line,) = ax.plot(steps, mid, label=_run_label(run_dir), linewidth=1.4)
            ax.fill_between(steps, lo, hi, alpha=0.2, color=line.get_color(), linewidth=0)
        ax.set_xlabel("iteration")
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
