"""Aggregate run directories into comparison tables and plot-ready files."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import ExperimentConfig

SUMMARY_METRICS = ("episodes", "total_steps", "mean_return", "final_success_rate",
                   "best_task_metric", "final_task_metric")


def run_dirs(group) -> list:
    """A run directory, or every run directory (holding metrics.csv) beneath ``group``."""
    root = Path(group)
    if (root / "metrics.csv").is_file():
        return [root]
    found = sorted(p.parent for p in root.rglob("metrics.csv"))
    if not found:
        raise FileNotFoundError(f"no metrics.csv under {root}")
    return found


def read_metrics(run_dir) -> list:
    with open(Path(run_dir) / "metrics.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def run_kind(run_dir) -> tuple:
    snap = Path(run_dir) / "config.snapshot"
    if not snap.is_file():
        return "", ""
    cfg = ExperimentConfig.from_text(snap.read_text())
    return cfg.kind, cfg.strategy


def summarize_run(rows: list, kind: str = "") -> dict:
    if not rows:
        raise ValueError("empty metrics file")
    ret = np.array([float(r["return"]) for r in rows])
    succ = np.array([float(r["success"]) for r in rows])
    task = np.array([float(r["task_metric"]) for r in rows])
    tail = max(1, len(rows) // 10)
    # energy errors improve downwards, fidelities and returns upwards
    best = task.min() if kind in ("qas", "transfer") else task.max()
    return {
        "episodes": float(len(rows)),
        "total_steps": float(rows[-1]["step"]),
        "mean_return": float(ret.mean()),
        "final_success_rate": float(succ[-tail:].mean()),
        "best_task_metric": float(best),
        "final_task_metric": float(task[-1]),
    }


def summarize_group(group) -> dict:
    dirs = run_dirs(group)
    kinds = {run_kind(d) for d in dirs}
    kind, strategy = sorted(kinds)[0] if kinds else ("", "")
    per_run = [summarize_run(read_metrics(d), kind) for d in dirs]
    agg = {}
    for m in SUMMARY_METRICS:
        vals = np.array([r[m] for r in per_run])
        agg[m] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return {"group": str(group), "kind": kind, "strategy": strategy, "runs": len(dirs),
            "metrics": agg, "per_run": per_run}


def compare(groups) -> list:
    """One summary per group; differences are taken against the first group."""
    out = [summarize_group(g) for g in groups]
    ref = out[0]["metrics"]
    for s in out:
        s["diff_vs_first"] = {m: s["metrics"][m]["mean"] - ref[m]["mean"] for m in SUMMARY_METRICS}
    return out


def format_comparison(summaries: list) -> str:
    head = ["metric"] + [f"{s['strategy'] or Path(s['group']).name} (n={s['runs']})"
                         for s in summaries]
    lines = ["\t".join(head)]
    for m in SUMMARY_METRICS:
        cells = [m]
        for s in summaries:
            v = s["metrics"][m]
            cells.append(f"{v['mean']:.6g} ± {v['std']:.3g}")
        lines.append("\t".join(cells))
    lines.append("\t".join(["diff_vs_first"] + [
        " ".join(f"{m}={s['diff_vs_first'][m]:.3g}" for m in SUMMARY_METRICS[2:])
        for s in summaries]))
    return "\n".join(lines)


def curves(group) -> list:
    """Per-episode mean/std across the group's runs (truncated to the shortest run)."""
    runs = [read_metrics(d) for d in run_dirs(group)]
    n = min(len(r) for r in runs)
    out = []
    for i in range(n):
        row = {"episode": i}
        for key in ("return", "success", "task_metric", "epsilon"):
            vals = np.array([float(r[i][key]) for r in runs])
            row[f"{key}_mean"] = float(vals.mean())
            row[f"{key}_std"] = float(vals.std())
        out.append(row)
    return out


def write_report(groups, path) -> None:
    """Plot-ready output: CSV of curves (one block per group) or JSON with everything."""
    path = Path(path)
    if path.suffix == ".json":
        body = {"summaries": compare(groups), "curves": {str(g): curves(g) for g in groups}}
        path.write_text(json.dumps(body, indent=2))
        return
    with open(path, "w", newline="") as fh:
        writer = None
        for g in groups:
            for row in curves(g):
                row = {"group": str(g), **row}
                if writer is None:
                    writer = csv.DictWriter(fh, fieldnames=list(row))
                    writer.writeheader()
                writer.writerow(row)
