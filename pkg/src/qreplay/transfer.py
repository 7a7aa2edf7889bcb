"""Noiseless-to-noisy replay transfer and its multi-objective score."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .envs.qas import CHEMICAL_ACCURACY
from .envs.vqe import NoiseModel
from .harness.config import ConfigError, ExperimentConfig
from .harness.runner import build_env, train_run
from .replay.buffer import ReplayBuffer, transfer_buffer
from .replay.storage import load_buffer, save_buffer

DEFAULT_WEIGHTS = (0.4, 0.1, 0.2, 0.3)  # steps, rotations, CNOTs, error


def transfer_score(deltas, weights=DEFAULT_WEIGHTS) -> float:
    d = [float(x) for x in deltas]
    w = [float(x) for x in weights]
    if len(d) != 4 or len(w) != 4:
        raise ValueError("need four deltas and four weights")
    return sum(wi * di for wi, di in zip(w, d))


def relative_improvement(baseline: float, candidate: float) -> float:
    """Percent reduction of ``candidate`` relative to ``baseline`` (positive = better)."""
    if baseline == 0:
        return 0.0 if candidate == 0 else -100.0
    return 100.0 * (baseline - candidate) / abs(baseline)


def steps_to_threshold(evaluations, threshold: float) -> Optional[int]:
    """First environment step at which the best error so far is <= ``threshold``."""
    best = np.inf
    for step, error in evaluations:
        best = min(best, error)
        if best <= threshold:
            return int(step)
    return None


@dataclass
class RunSummary:
    seed: int
    steps_to_threshold: Optional[int]
    total_steps: int
    best_error: float
    rot: int
    cnot: int
    wall_ms: float
    # same quantities restricted to a shared step budget
    budget_error: float = float("nan")
    budget_rot: int = 0
    budget_cnot: int = 0


@dataclass
class TransferReport:
    delta_steps: float
    delta_rot: float
    delta_cnot: float
    delta_err: float
    weights: tuple = DEFAULT_WEIGHTS
    score: float = 0.0
    budget_deltas: dict = field(default_factory=dict)
    budget_score: float = 0.0
    threshold: float = CHEMICAL_ACCURACY
    noise: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    transfer_runs: list = field(default_factory=list)
    baseline_runs: list = field(default_factory=list)
    source_buffer_file: str = ""
    target_env: str = ""
    runtimes_ms: dict = field(default_factory=dict)

    @property
    def deltas(self) -> tuple:
        return (self.delta_steps, self.delta_rot, self.delta_cnot, self.delta_err)

    def to_json(self) -> str:
        body = {
            "source_buffer_file": self.source_buffer_file,
            "target_env": self.target_env,
            "noise": self.noise,
            "threshold": self.threshold,
            "deltas": {"steps": self.delta_steps, "rot": self.delta_rot,
                       "cnot": self.delta_cnot, "err": self.delta_err},
            "budget_deltas": self.budget_deltas,
            "weights": list(self.weights),
            "weights_sum": float(sum(self.weights)),
            "score": self.score,
            "budget_score": self.budget_score,
            "seeds": self.seeds,
            "runtimes_ms": self.runtimes_ms,
            "transfer_runs": [asdict(r) for r in self.transfer_runs],
            "baseline_runs": [asdict(r) for r in self.baseline_runs],
        }
        return json.dumps(body, indent=2, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"not serializable: {type(x)}")


def _best_until(result, step_budget: Optional[int]) -> tuple:
    """(best error, rot, cnot) of the best episode finishing within ``step_budget`` steps."""
    best = (np.inf, 0, 0)
    for row, metric in zip(result.episode_log.rows, result.metrics):
        if step_budget is not None and metric["step"] > step_budget:
            break
        err, rot, cnot = row[4], row[7], row[6]
        if (err, rot + cnot) < (best[0], best[1] + best[2]):
            best = (err, rot, cnot)
    return best


def summarize(result, seed: int, threshold: float, step_budget: Optional[int] = None) -> RunSummary:
    err, rot, cnot = _best_until(result, None)
    b_err, b_rot, b_cnot = _best_until(result, step_budget)
    return RunSummary(seed, steps_to_threshold(result.evaluations, threshold),
                      result.metrics[-1]["step"] if result.metrics else 0, float(err), int(rot),
                      int(cnot), result.wall_ms, float(b_err), int(b_rot), int(b_cnot))


def _median_steps(runs) -> float:
    # runs that never reach the threshold count as their whole budget
    return float(np.median([r.steps_to_threshold if r.steps_to_threshold is not None
                            else r.total_steps for r in runs]))


def _deltas(base: list, trans: list, budget: bool) -> tuple:
    med = lambda runs, attr: float(np.median([getattr(r, attr) for r in runs]))  # noqa: E731
    prefix = "budget_" if budget else ""
    return (relative_improvement(_median_steps(base), _median_steps(trans)),
            relative_improvement(med(base, prefix + "rot"), med(trans, prefix + "rot")),
            relative_improvement(med(base, prefix + "cnot"), med(trans, prefix + "cnot")),
            relative_improvement(med(base, prefix + ("error" if budget else "best_error")),
                                 med(trans, prefix + ("error" if budget else "best_error"))))


def noise_from_config(cfg: ExperimentConfig, override: Optional[dict] = None) -> NoiseModel:
    t = cfg.section("transfer")
    p = {"p1": t.get("p1", 0.001), "p2": t.get("p2", 0.005)}
    p.update(override or {})
    return NoiseModel(float(p["p1"]), float(p["p2"]))


def run_transfer(cfg: ExperimentConfig, seeds=None, source_buffer: Optional[ReplayBuffer] = None,
                 source_buffer_file=None, noise: Optional[NoiseModel] = None, out_dir=None,
                 weights=None, progress=None) -> TransferReport:
    """Source run (noiseless) -> buffer transfer -> noisy target run, against a noisy baseline.

    Target and baseline share the seed, so they differ only through the warm start
    and the reduced initial exploration.
    """
    t = cfg.section("transfer")
    seeds = list(range(int(cfg.get("experiment", "seeds", 1)))) if seeds is None else list(seeds)
    noise = noise or noise_from_config(cfg)
    weights = tuple(weights or t.get("weights", DEFAULT_WEIGHTS))
    threshold = float(t.get("chemical_accuracy", CHEMICAL_ACCURACY)) * float(
        t.get("threshold_scale", 1.0))
    eps_target = float(t.get("eps_start", 0.55))
    source_episodes = int(t.get("source_episodes", cfg.get("experiment", "episodes", 1)))

    # shapes must agree before anything is trained
    probe = build_env(cfg, np.random.default_rng(0), 0, noise)
    if source_buffer_file is not None:
        try:
            source_buffer = load_buffer(source_buffer_file, state_dim=probe.obs_dim,
                                        action_count=probe.n_actions)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read source buffer: {exc}") from exc
    if source_buffer is not None and (source_buffer.state_dim != probe.obs_dim or
                                      source_buffer.action_count not in (0, probe.n_actions)):
        raise ConfigError("source buffer and target environment differ in state/action shape")

    out = Path(out_dir) if out_dir is not None else None
    trans_runs, base_runs = [], []
    runtimes = {"source": 0.0, "transfer": 0.0, "baseline": 0.0}
    for seed in seeds:
        buf = source_buffer
        if buf is None:
            t0 = time.perf_counter()
            src = train_run(cfg, seed, None if out is None else out / "source" / str(seed),
                            episodes=source_episodes, noise=NoiseModel())
            runtimes["source"] += (time.perf_counter() - t0) * 1000
            buf = src.buffer
        warm = transfer_buffer(buf, strategy=cfg.strategy,
                               keep_priorities=bool(t.get("keep_priorities", False)))
        t0 = time.perf_counter()
        tr = train_run(cfg, seed, None if out is None else out / "transfer" / str(seed),
                       buffer=warm, eps_start=eps_target, noise=noise)
        runtimes["transfer"] += (time.perf_counter() - t0) * 1000
        t0 = time.perf_counter()
        base = train_run(cfg, seed, None if out is None else out / "baseline" / str(seed),
                         noise=noise)
        runtimes["baseline"] += (time.perf_counter() - t0) * 1000
        budget = min(tr.metrics[-1]["step"], base.metrics[-1]["step"])
        trans_runs.append(summarize(tr, seed, threshold, budget))
        base_runs.append(summarize(base, seed, threshold, budget))
        if progress is not None:
            progress(seed, trans_runs[-1], base_runs[-1])

    deltas = _deltas(base_runs, trans_runs, budget=False)
    budget = _deltas(base_runs, trans_runs, budget=True)
    report = TransferReport(
        *deltas, weights=weights, score=transfer_score(deltas, weights),
        budget_deltas=dict(zip(("steps", "rot", "cnot", "err"), budget)),
        budget_score=transfer_score(budget, weights), threshold=threshold,
        noise={"p1": noise.p1, "p2": noise.p2}, seeds=seeds, transfer_runs=trans_runs,
        baseline_runs=base_runs, source_buffer_file=str(source_buffer_file or ""),
        target_env=f"{cfg.name}+depolarizing", runtimes_ms=runtimes)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "transfer_report.json").write_text(report.to_json())
        if source_buffer is None and buf is not None:
            save_buffer(buf, out / "source.buf")
    return report
