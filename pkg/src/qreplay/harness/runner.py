"""Seeded training runs: build env/agent/buffer from a config, train, persist."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..agent.dqn import AgentConfig, DQNAgent
from ..agent.network import save_network
from ..envs.chain import ChainConfig, ChainEnv
from ..envs.compile import CompileConfig, CompileEnv
from ..envs.qas import Curriculum, EpisodeLog, QasConfig, QasEnv
from ..envs.vqe import NoiseModel, OptimizerConfig
from ..qcore.hamiltonian import heisenberg_hamiltonian, read_hamiltonian
from ..replay.buffer import ReplayBuffer, Transition
from ..replay.her import her_relabel
from ..replay.priorities import OmegaSchedule, PrioritySpec, Strategy
from ..replay.storage import save_buffer
from .config import ConfigError, ExperimentConfig

METRIC_COLUMNS = ("run_id", "episode", "step", "return", "loss", "epsilon", "omega_now",
                  "success", "task_metric", "wall_ms")


def seed_list(cfg: ExperimentConfig) -> list:
    seeds = cfg.get("experiment", "seeds", 1)
    return list(range(int(seeds))) if isinstance(seeds, int) else [int(s) for s in seeds]


# -- builders ------------------------------------------------------------------

def _pick(section: dict, keys) -> dict:
    return {k: section[k] for k in keys if k in section}


def compile_config(cfg: ExperimentConfig) -> CompileConfig:
    return CompileConfig(**_pick(cfg.section("env"), (
        "gateset", "tolerance", "max_len", "reward_mode", "target_mode",
        "target_min_len", "target_max_len")))


def qas_hamiltonian(env: dict):
    source = env.get("hamiltonian", "heisenberg")
    if source == "heisenberg":
        return heisenberg_hamiltonian(int(env["n_qubits"]))
    h = read_hamiltonian(source)
    if "n_qubits" in env and h.n_qubits != int(env["n_qubits"]):
        raise ConfigError(f"Hamiltonian file has {h.n_qubits} qubits, config says {env['n_qubits']}")
    return h


def qas_config(cfg: ExperimentConfig, noise: Optional[NoiseModel] = None) -> QasConfig:
    env = cfg.section("env")
    if noise is None and (env.get("p1", 0.0) or env.get("p2", 0.0)):
        noise = NoiseModel(float(env.get("p1", 0.0)), float(env.get("p2", 0.0)))
    opt = OptimizerConfig(method=env.get("optimizer", "cobyla"),
                          max_iter=int(env.get("max_iter", 1000)),
                          warm_start=bool(env.get("warm_start", True)))
    return QasConfig(hamiltonian=qas_hamiltonian(env), max_layers=int(env.get("max_layers", 20)),
                     encoding=env.get("encoding", "I"), m=int(env.get("m", 1)),
                     max_steps=int(env.get("max_steps", 20)), c_min=env.get("c_min"),
                     noise=noise, optimizer=opt)


def curriculum(cfg: ExperimentConfig) -> Curriculum:
    env = cfg.section("env")
    return Curriculum(**_pick(env, ("xi", "shift_ball", "shift_time", "success_threshold",
                                    "margin", "floor")))


def build_env(cfg: ExperimentConfig, rng: np.random.Generator, seed: int,
              noise: Optional[NoiseModel] = None):
    kind = cfg.kind
    if kind == "compile":
        return CompileEnv(compile_config(cfg), rng)
    if kind in ("qas", "transfer"):
        return QasEnv(qas_config(cfg, noise), curriculum(cfg), seed=seed)
    if kind == "diag":
        return ChainEnv(ChainConfig(**_pick(cfg.section("env"), ("length", "slip", "max_steps"))),
                        rng)
    raise ConfigError(f"unknown experiment kind {kind!r}")


def env_id(cfg: ExperimentConfig, env) -> str:
    return f"{cfg.kind}:{cfg.name}:{env.obs_dim}x{env.n_actions}"


def agent_config(cfg: ExperimentConfig, eps_start: Optional[float] = None) -> AgentConfig:
    fields = set(AgentConfig.__dataclass_fields__)
    values = {k: v for k, v in cfg.section("agent").items() if k in fields}
    if eps_start is not None:
        values["eps_start"] = eps_start
    return AgentConfig(**values)


def priority_spec(cfg: ExperimentConfig) -> PrioritySpec:
    return PrioritySpec(**_pick(cfg.section("replay"), (
        "alpha", "omega", "beta0", "beta_anneal_frames", "epsilon_priority")))


def omega_schedule(cfg: ExperimentConfig) -> OmegaSchedule:
    return OmegaSchedule(**_pick(cfg.section("replay"), ("omega_min", "omega_max", "t_ann")))


def build_buffer(cfg: ExperimentConfig, env) -> ReplayBuffer:
    strategy = Strategy(cfg.strategy)
    goal_dim = 0
    if strategy is Strategy.HER:
        if not hasattr(env, "achieved_goal"):
            raise ConfigError(f"hindsight relabeling is not available for {cfg.kind}")
        goal_dim = env.goal.size
    return ReplayBuffer(int(cfg.get("replay", "capacity", 100000)), env.obs_dim, strategy,
                        spec=priority_spec(cfg), schedule=omega_schedule(cfg),
                        action_count=env.n_actions, goal_dim=goal_dim, env_id=env_id(cfg, env))


# -- training ------------------------------------------------------------------

@dataclass
class RunResult:
    agent: DQNAgent
    buffer: ReplayBuffer
    env: object
    metrics: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)  # (global step, error) per energy evaluation
    episode_log: Optional[EpisodeLog] = None
    run_dir: Optional[Path] = None
    wall_ms: float = 0.0

    def best_episode(self) -> Optional[dict]:
        if self.episode_log is None or not self.episode_log.rows:
            return None
        row = min(self.episode_log.rows, key=lambda r: (r[4], r[5]))
        return dict(zip(("episode", "steps", "evals", "best_cost", "error_vs_exact",
                         "total_gates", "cnot", "rot"), row[:8]))


class MetricsWriter:
    """Append-only CSV, flushed after every row."""

    def __init__(self, path: Optional[Path]):
        self.fh = None
        if path is not None:
            self.fh = open(path, "w", newline="")
            self.writer = csv.writer(self.fh)
            self.writer.writerow(METRIC_COLUMNS)
            self.fh.flush()

    def write(self, row: dict) -> None:
        if self.fh is not None:
            self.writer.writerow([row[c] for c in METRIC_COLUMNS])
            self.fh.flush()

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def greedy_policy(agent: DQNAgent):
    return lambda obs, mask: agent.act(obs, mask, greedy=True)


def train_run(cfg: ExperimentConfig, seed: int, out_dir=None, buffer: Optional[ReplayBuffer] = None,
              eps_start: Optional[float] = None, noise: Optional[NoiseModel] = None,
              episodes: Optional[int] = None, run_id: Optional[str] = None) -> RunResult:
    """Train one seed.  ``buffer`` warm-starts replay (e.g. a transferred buffer)."""
    env_seq, agent_seq = np.random.SeedSequence(seed).spawn(2)
    env_rng, agent_rng = np.random.default_rng(env_seq), np.random.default_rng(agent_seq)
    env = build_env(cfg, env_rng, seed, noise)
    if buffer is None:
        buffer = build_buffer(cfg, env)
    elif buffer.state_dim != env.obs_dim or buffer.action_count not in (0, env.n_actions):
        raise ConfigError(f"buffer shape {buffer.state_dim}x{buffer.action_count} does not match "
                          f"environment {env.obs_dim}x{env.n_actions}")
    agent = DQNAgent(env.obs_dim, env.n_actions, agent_config(cfg, eps_start), buffer, agent_rng)
    her_k = int(cfg.get("replay", "her_k", 5))
    use_her = buffer.strategy is Strategy.HER
    is_qas = isinstance(env, QasEnv)
    episodes = int(cfg.get("experiment", "episodes", 1)) if episodes is None else episodes
    run_id = run_id or f"{cfg.name or cfg.kind}-{buffer.strategy.value}-s{seed}"

    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.snapshot")
    writer = MetricsWriter(None if run_dir is None else run_dir / "metrics.csv")
    result = RunResult(agent, buffer, env, episode_log=EpisodeLog() if is_qas else None,
                       run_dir=run_dir)
    start = time.perf_counter()
    global_step = 0
    try:
        for ep in range(episodes):
            t0 = time.perf_counter()
            obs = env.reset()
            eid = buffer.new_episode_id()
            goal = env.goal if use_her else None
            raw, ret, done, info, step = [], 0.0, False, {}, 0
            while not done:
                action = agent.act(obs, env.legal_mask())
                nxt, reward, done, info = env.step(action)
                step += 1
                global_step += 1
                tr = Transition(obs, action, reward, nxt, info.get("terminal", done), eid, step, goal)
                raw.append(tr)
                agent.observe(tr)
                ret += reward
                if info.get("evaluated"):
                    result.evaluations.append((global_step, info["error"]))
                obs = nxt
            extra = []
            if use_her:
                hid = buffer.new_episode_id()
                extra = [Transition(t.state, t.action, t.reward, t.next_state, t.done, hid,
                                    t.step, t.goal)
                         for t in her_relabel(raw, her_k, env.relabel_reward, env.achieved_goal,
                                              agent.rng, env.relabel_states)]
            agent.end_episode(eid, extra)
            if is_qas:
                stats = env.end_episode()
                task = stats["min_error"]
                result.episode_log.record(ep, stats, env.curriculum.xi, agent.epsilon)
            else:
                task = info.get("fidelity", ret)
            row = {
                "run_id": run_id, "episode": ep, "step": global_step, "return": ret,
                "loss": agent.stats.last_loss, "epsilon": agent.epsilon,
                "omega_now": buffer.omega_now() if buffer.strategy.reliability_aware else "",
                "success": int(bool(info.get("success", False))), "task_metric": task,
                "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
            }
            if not math.isfinite(ret):
                raise FloatingPointError("non-finite episode return")
            result.metrics.append(row)
            writer.write(row)
    finally:
        writer.close()
    result.wall_ms = (time.perf_counter() - start) * 1000.0
    if run_dir is not None:
        save_network(agent.online, run_dir / "net.ckpt")
        save_buffer(buffer, run_dir / "buffer.buf")
        if result.episode_log is not None:
            result.episode_log.write(run_dir / "episodes.csv")
    return result


def episodes_to_rate(metrics: list, rate: float = 0.5, window: int = 100) -> Optional[int]:
    """First episode whose trailing-window success rate reaches ``rate``."""
    wins = np.array([m["success"] for m in metrics], dtype=float)
    for i in range(wins.size):
        lo = max(0, i + 1 - window)
        if wins[lo:i + 1].mean() >= rate:
            return i + 1
    return None
