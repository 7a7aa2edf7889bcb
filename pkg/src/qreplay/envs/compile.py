"""Gate-by-gate unitary compilation as an episodic MDP.

The observation is the residual ``O_t = U_t^dagger U_tar`` split into real
and imaginary parts.  Appending gate ``A`` updates ``U_t <- U_t A`` and so
``O_t <- A^dagger O_t``.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..qcore.gates import gate_matrix, hrc_gateset, small_rotation_gateset, two_qubit_gateset
from ..qcore.unitary import haar_random_unitary, random_circuit_target
from ..replay.buffer import Transition


class GateSet(str, enum.Enum):
    SMALL_ROTATIONS_1Q = "small_rotations_1q"
    HRC_1Q = "hrc_1q"
    TWO_QUBIT = "two_qubit"


class RewardMode(str, enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"


class TargetMode(str, enum.Enum):
    HAAR = "haar"
    CIRCUIT = "circuit"  # random words over the action gateset


class EpisodeOver(RuntimeError):
    pass


@dataclass(frozen=True)
class CompileConfig:
    gateset: GateSet = GateSet.SMALL_ROTATIONS_1Q
    tolerance: float = 0.99
    max_len: int = 130
    reward_mode: RewardMode = RewardMode.DENSE
    target_mode: TargetMode = TargetMode.HAAR
    target_min_len: int = 1
    target_max_len: int = 20

    def __post_init__(self):
        object.__setattr__(self, "gateset", GateSet(self.gateset))
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        object.__setattr__(self, "target_mode", TargetMode(self.target_mode))
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_len < 1:
            raise ValueError("max_len must be positive")
        if not 1 <= self.target_min_len <= self.target_max_len:
            raise ValueError("need 1 <= target_min_len <= target_max_len")

    @property
    def n_qubits(self) -> int:
        return 2 if self.gateset is GateSet.TWO_QUBIT else 1

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def obs_dim(self) -> int:
        return 2 * self.dim * self.dim

    @property
    def epsilon(self) -> float:
        return 1.0 - self.tolerance


def action_space(config: CompileConfig) -> list:
    if config.gateset is GateSet.SMALL_ROTATIONS_1Q:
        return small_rotation_gateset()
    if config.gateset is GateSet.HRC_1Q:
        return hrc_gateset()
    return two_qubit_gateset()


def encode_unitary(u: np.ndarray) -> np.ndarray:
    return np.concatenate([u.real.ravel(), u.imag.ravel()])


def decode_unitary(v: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    half = dim * dim
    return (v[:half] + 1j * v[half:]).reshape(dim, dim)


def trace_fidelity(residual: np.ndarray) -> float:
    """``|Tr(U^dagger V)| / dim`` expressed through the residual ``U^dagger V``."""
    return min(1.0, abs(np.trace(residual)) / residual.shape[0])


def step_reward(config: CompileConfig, fid: float, step: int) -> tuple:
    """``(reward, success)`` after the ``step``-th action (1-based)."""
    success = 1.0 - fid < config.epsilon
    if config.reward_mode is RewardMode.DENSE:
        reward = (config.max_len - step) + 1.0 if success else -(1.0 - fid) / config.max_len
    else:
        reward = 0.0 if success else -1.0 / config.max_len
    return float(reward), bool(success)


class CompileEnv:
    def __init__(self, config: CompileConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.rng = rng or np.random.default_rng()
        self.actions = action_space(config)
        mats = [gate_matrix(g, config.n_qubits) for g in self.actions]
        self._mats = mats
        self._adj = [m.conj().T for m in mats]
        self.target = np.eye(config.dim, dtype=complex)
        self.residual = self.target.copy()
        self.accumulated = np.eye(config.dim, dtype=complex)
        self.t = 0
        self.done = True
        self.history: list = []

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    @property
    def goal(self) -> np.ndarray:
        return encode_unitary(self.target)

    def sample_target(self) -> np.ndarray:
        cfg = self.config
        if cfg.target_mode is TargetMode.HAAR:
            return haar_random_unitary(self.rng, cfg.dim)
        return random_circuit_target(self.rng, self.actions, cfg.n_qubits,
                                     cfg.target_min_len, cfg.target_max_len)

    def reset(self, target: Optional[np.ndarray] = None) -> np.ndarray:
        if target is None:
            target = self.sample_target()
        target = np.asarray(target, dtype=complex)
        if target.shape != (self.config.dim, self.config.dim):
            raise ValueError(f"target must be {self.config.dim}x{self.config.dim}")
        self.target = target
        self.accumulated = np.eye(self.config.dim, dtype=complex)
        self.residual = target.copy()
        self.t = 0
        self.done = False
        self.history = []
        return self.observation()

    def observation(self) -> np.ndarray:
        return encode_unitary(self.residual)

    def legal_mask(self) -> np.ndarray:
        return np.ones(self.n_actions, dtype=bool)

    def fidelity(self) -> float:
        return trace_fidelity(self.residual)

    def step(self, action: int):
        if self.done:
            raise EpisodeOver("episode already finished; call reset()")
        a = int(action)
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} outside [0, {self.n_actions})")
        self.accumulated = self.accumulated @ self._mats[a]
        self.residual = self._adj[a] @ self.residual
        self.t += 1
        self.history.append(a)
        fid = self.fidelity()
        reward, success = step_reward(self.config, fid, self.t)
        self.done = success or self.t >= self.config.max_len
        return self.observation(), reward, self.done, {"fidelity": fid, "success": success}

    # -- hindsight hooks ---------------------------------------------------

    def achieved_goal(self, tr: Transition) -> np.ndarray:
        """Unitary built so far after ``tr``: ``U_{t+1} = U_tar O_{t+1}^dagger``."""
        d = self.config.dim
        u_tar = decode_unitary(tr.goal, d)
        o_next = decode_unitary(tr.next_state, d)
        return encode_unitary(u_tar @ o_next.conj().T)

    def relabel_states(self, tr: Transition, goal: np.ndarray):
        """Residuals seen under ``goal``: ``O' = O U_tar^dagger g``."""
        d = self.config.dim
        shift = decode_unitary(tr.goal, d).conj().T @ decode_unitary(goal, d)
        o = decode_unitary(tr.state, d) @ shift
        o_next = decode_unitary(tr.next_state, d) @ shift
        return encode_unitary(o), encode_unitary(o_next)

    def relabel_reward(self, tr: Transition, goal: np.ndarray):
        _, o_next = self.relabel_states(tr, goal)
        fid = trace_fidelity(decode_unitary(o_next, self.config.dim))
        return step_reward(self.config, fid, tr.step)


def rollout(env: CompileEnv, policy: Callable, target: np.ndarray) -> dict:
    obs = env.reset(target)
    info = {"fidelity": env.fidelity(), "success": False}
    done = False
    while not done:
        obs, _, done, info = env.step(policy(obs, env.legal_mask()))
    return {"success": info["success"], "fidelity": info["fidelity"], "length": env.t}


def evaluate(policy: Callable, config: CompileConfig, n_targets: int, tolerances,
             rng: np.random.Generator, targets=None) -> dict:
    """Greedy rollouts on fresh targets for each tolerance; same targets across tolerances."""
    sampler = CompileEnv(config, rng)
    if targets is None:
        targets = [sampler.sample_target() for _ in range(n_targets)]
    out = {}
    for tol in tolerances:
        env = CompileEnv(CompileConfig(**{**config.__dict__, "tolerance": tol}), rng)
        runs = [rollout(env, policy, u) for u in targets]
        lens = np.array([r["length"] for r in runs], dtype=float)
        out[tol] = {
            "n_targets": len(runs),
            "success_rate": float(np.mean([r["success"] for r in runs])),
            "mean_fidelity": float(np.mean([r["fidelity"] for r in runs])),
            "mean_len": float(lens.mean()),
            "std_len": float(lens.std()),
        }
    return out


REPORT_COLUMNS = ("tolerance", "n_targets", "success_rate", "mean_fidelity", "mean_len",
                  "std_len", "seed")


def write_evaluation_csv(report: dict, path, seed: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for tol, row in report.items():
            w.writerow([tol, row["n_targets"], row["success_rate"], row["mean_fidelity"],
                        row["mean_len"], row["std_len"], seed])
