"""Architecture search for variational ground-state circuits.

The circuit under construction lives in a tensor ``S[layer, row, qubit]``
with ``n + 3`` rows: rows ``0..n-1`` form the two-qubit connectivity plane
(row = target, column = control) and rows ``n..n+2`` mark X/Y/Z rotations.
Encoding I stores CNOTs as 1; encoding II stores RXX/RYY/RZZ as labels
1/2/3 in the same plane.  ``moments[q]`` is the first free layer of qubit q.

Energy is only evaluated every ``m`` steps and on the final step; between
evaluations the reward is 0 and the cost feature in the observation is stale.
"""
from __future__ import annotations

import csv
import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..qcore.gates import GateKind, GateSpec
from ..qcore.hamiltonian import PauliHamiltonian, exact_ground_energy
from .vqe import CostFunction, NoiseModel, OptimizerConfig, optimize_parameters

CHEMICAL_ACCURACY = 1.6e-3
SUCCESS_REWARD = 5.0
FAILURE_REWARD = -5.0

_AXIS_KIND = {1: GateKind.RX, 2: GateKind.RY, 3: GateKind.RZ}
_LABEL_KIND = {1: GateKind.RXX, 2: GateKind.RYY, 3: GateKind.RZZ}
_KIND_LABEL = {v: k for k, v in _LABEL_KIND.items()}


class Encoding(str, enum.Enum):
    I = "I"    # noqa: E741  CNOT + rotations, binary tensor
    II = "II"  # RXX/RYY/RZZ + rotations, labelled connectivity plane


class PlacementError(ValueError):
    pass


class EpisodeOver(RuntimeError):
    pass


# -- tensor encoding ---------------------------------------------------------

@dataclass
class CircuitTensor:
    n_qubits: int
    max_layers: int
    tensor: np.ndarray = None
    moments: np.ndarray = None

    def __post_init__(self):
        if self.tensor is None:
            self.tensor = np.zeros((self.max_layers, self.n_qubits + 3, self.n_qubits))
        if self.moments is None:
            self.moments = np.zeros(self.n_qubits, dtype=np.int64)

    def copy(self) -> "CircuitTensor":
        return CircuitTensor(self.n_qubits, self.max_layers, self.tensor.copy(),
                             self.moments.copy())

    def two_qubit_layer(self, control: int, target: int) -> int:
        return int(max(self.moments[control], self.moments[target]))

    def place_two_qubit(self, control: int, target: int, label: int = 1) -> tuple:
        n = self.n_qubits
        if not (0 <= control < n and 0 <= target < n) or control == target:
            raise PlacementError(f"bad two-qubit placement ({control}, {target})")
        layer = self.two_qubit_layer(control, target)
        if layer >= self.max_layers:
            raise PlacementError("placement exceeds the layer budget")
        self.tensor[layer, target, control] = label
        self.moments[control] = self.moments[target] = layer + 1
        return layer, target, control

    def place_rotation(self, qubit: int, axis: int) -> tuple:
        n = self.n_qubits
        if not 0 <= qubit < n or axis not in _AXIS_KIND:
            raise PlacementError(f"bad rotation placement (qubit {qubit}, axis {axis})")
        layer = int(self.moments[qubit])
        if layer >= self.max_layers:
            raise PlacementError("placement exceeds the layer budget")
        self.tensor[layer, n + axis - 1, qubit] = 1
        self.moments[qubit] = layer + 1
        return layer, n + axis - 1, qubit


def encode_action_I(state: CircuitTensor, action) -> list:
    """Apply ``[control, offset, rot_qubit, axis]``; ``n`` is the no-gate sentinel."""
    a0, a1, a2, a3 = (int(x) for x in action)
    n = state.n_qubits
    for v in (a0, a1, a2):
        if not 0 <= v <= n:
            raise PlacementError(f"action index {v} outside [0, {n}]")
    writes = []
    if a0 != n:
        writes.append(state.place_two_qubit(a0, (a0 + a1) % n, 1))
    if a2 != n:
        writes.append(state.place_rotation(a2, a3))
    return writes


def encode_action_II(state: CircuitTensor, action) -> list:
    """Apply ``[c_xx, o_xx, c_yy, o_yy, c_zz, o_zz, rot_qubit, axis]``."""
    vals = [int(x) for x in action]
    if len(vals) != 8:
        raise PlacementError("encoding II actions have eight entries")
    n = state.n_qubits
    for v in vals[:7]:
        if not 0 <= v <= n:
            raise PlacementError(f"action index {v} outside [0, {n}]")
    writes = []
    for label in (1, 2, 3):
        c, off = vals[2 * (label - 1)], vals[2 * (label - 1) + 1]
        if c != n:
            writes.append(state.place_two_qubit(c, (c + off) % n, label))
    if vals[6] != n:
        writes.append(state.place_rotation(vals[6], vals[7]))
    return writes


def placements(tensor: np.ndarray, encoding: Encoding) -> list:
    """``(layer, row, col, GateSpec-without-angle-or-with-zero)`` ordered by layer then qubit."""
    layers, rows, n = tensor.shape
    out = []
    for layer in range(layers):
        items = []
        for row, col in zip(*np.nonzero(tensor[layer])):
            row, col = int(row), int(col)
            val = int(round(tensor[layer, row, col]))
            if row < n:
                if encoding is Encoding.I:
                    if val != 1:
                        raise PlacementError(f"encoding I holds binary entries, got {val}")
                    spec = GateSpec(GateKind.CNOT, (col, row))
                else:
                    if val not in _LABEL_KIND:
                        raise PlacementError(f"unknown connectivity label {val}")
                    spec = GateSpec(_LABEL_KIND[val], (col, row), 0.0)
                key = min(col, row)
            else:
                spec = GateSpec(_AXIS_KIND[row - n + 1], (col,), 0.0)
                key = col
            items.append((key, layer, row, col, spec))
        items.sort(key=lambda it: it[0])
        out += [it[1:] for it in items]
    return out


def build_circuit(tensor: np.ndarray, encoding, thetas=None) -> list:
    """Gate list in layer-then-qubit order; ``thetas`` bind the parameterized gates in order."""
    encoding = Encoding(encoding)
    specs = [p[3] for p in placements(tensor, encoding)]
    k = sum(1 for s in specs if s.parameterized)
    thetas = np.zeros(k) if thetas is None else np.asarray(thetas, dtype=float)
    if thetas.shape != (k,):
        raise ValueError(f"circuit has {k} parameters, got {thetas.shape}")
    it = iter(thetas)
    return [s.with_angle(float(next(it))) if s.parameterized else s for s in specs]


def encode_circuit(gates, n_qubits: int, max_layers: int, encoding) -> CircuitTensor:
    """Re-encode a gate list by greedy layer assignment."""
    encoding = Encoding(encoding)
    state = CircuitTensor(n_qubits, max_layers)
    axis_of = {v: k for k, v in _AXIS_KIND.items()}
    for g in gates:
        if g.kind is GateKind.CNOT and encoding is Encoding.I:
            state.place_two_qubit(g.qubits[0], g.qubits[1], 1)
        elif g.kind in _KIND_LABEL and encoding is Encoding.II:
            state.place_two_qubit(g.qubits[0], g.qubits[1], _KIND_LABEL[g.kind])
        elif g.kind in axis_of:
            state.place_rotation(g.qubits[0], axis_of[g.kind])
        else:
            raise PlacementError(f"{g.kind.value} is not in encoding {encoding.value}")
    return state


def discrete_actions(n_qubits: int, encoding) -> list:
    """One gate per action: every ordered two-qubit placement, then every rotation."""
    encoding = Encoding(encoding)
    n = n_qubits
    out = []
    if encoding is Encoding.I:
        for c in range(n):
            for off in range(1, n):
                out.append((c, off, n, 1))
        for q in range(n):
            for axis in (1, 2, 3):
                out.append((n, 0, q, axis))
        return out
    for label in (1, 2, 3):
        for c in range(n):
            for off in range(1, n):
                a = [n] * 6 + [n, 1]
                a[2 * (label - 1)], a[2 * (label - 1) + 1] = c, off
                out.append(tuple(a))
    for q in range(n):
        for axis in (1, 2, 3):
            out.append((n, 0, n, 0, n, 0, q, axis))
    return out


# -- curriculum ----------------------------------------------------------------

@dataclass
class Curriculum:
    """Monotone acceptance threshold on the energy error.

    Every ``shift_time`` episodes the threshold drops by ``shift_ball``.  After
    ``success_threshold`` successes at the current level it snaps down to the
    best error seen plus ``margin``.  It never goes below ``floor``.
    """

    xi: float = 5.0
    shift_ball: float = 0.001
    shift_time: int = 2000
    success_threshold: int = 50
    margin: float = CHEMICAL_ACCURACY
    floor: float = CHEMICAL_ACCURACY
    episodes: int = 0
    success_count: int = 0
    best_error: float = math.inf

    def __post_init__(self):
        if self.shift_ball <= 0 or self.shift_time < 1 or self.success_threshold < 1:
            raise ValueError("shift_ball, shift_time and success_threshold must be positive")

    def _lower(self, value: float) -> None:
        self.xi = min(self.xi, max(value, min(self.floor, self.xi)))

    def update(self, success: bool, best_error: float = math.inf) -> float:
        self.episodes += 1
        self.best_error = min(self.best_error, best_error)
        if success:
            self.success_count += 1
            if self.success_count >= self.success_threshold:
                self._lower(self.best_error + self.margin)
                self.success_count = 0
        if self.episodes % self.shift_time == 0:
            self._lower(self.xi - self.shift_ball)
        return self.xi


# -- environment ---------------------------------------------------------------

@dataclass(frozen=True)
class QasConfig:
    hamiltonian: PauliHamiltonian
    max_layers: int = 20
    encoding: Encoding = Encoding.I
    m: int = 1
    max_steps: int = 20
    c_min: Optional[float] = None
    noise: Optional[NoiseModel] = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    mask_repeats: bool = True

    def __post_init__(self):
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        if self.m < 1 or self.max_steps < 1 or self.max_layers < 1:
            raise ValueError("m, max_steps and max_layers must be positive")

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def obs_dim(self) -> int:
        return self.max_layers * (self.n_qubits + 3) * self.n_qubits + 1


@dataclass
class Evaluation:
    step: int
    cost: float
    error: float


class QasEnv:
    def __init__(self, config: QasConfig, curriculum: Optional[Curriculum] = None,
                 exact_energy: Optional[float] = None, seed: int = 0):
        self.config = config
        self.curriculum = curriculum or Curriculum()
        self.exact_energy = exact_ground_energy(config.hamiltonian) \
            if exact_energy is None else float(exact_energy)
        self.c_min = config.hamiltonian.coefficient_bound() if config.c_min is None \
            else float(config.c_min)
        if self.c_min > self.exact_energy + 1e-9:
            raise ValueError("c_min must not exceed the exact ground energy")
        self.actions = discrete_actions(config.n_qubits, config.encoding)
        self._encode = encode_action_I if config.encoding is Encoding.I else encode_action_II
        self.seed = seed
        self.empty_cost = self._cost_function([])(np.zeros(0))
        self.done = True
        self.state = CircuitTensor(config.n_qubits, config.max_layers)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    def _cost_function(self, template) -> CostFunction:
        return CostFunction(template, self.config.hamiltonian, self.config.noise, self.seed)

    def reset(self) -> np.ndarray:
        self.state = CircuitTensor(self.config.n_qubits, self.config.max_layers)
        self.t = 0
        self.done = False
        self.success = False
        self.thetas: dict = {}
        self.last_eval_cost = self.empty_cost
        self.evaluations: list = []
        self.prev_action: Optional[int] = None
        self.optimizer_calls = 0
        return self.observation()

    def observation(self) -> np.ndarray:
        return np.append(self.state.tensor.ravel(), self.last_eval_cost)

    def _fits(self, action: int) -> bool:
        a = self.actions[action]
        n = self.config.n_qubits
        s = self.state
        if self.config.encoding is Encoding.I:
            if a[0] != n:
                return s.two_qubit_layer(a[0], (a[0] + a[1]) % n) < s.max_layers
            return s.moments[a[2]] < s.max_layers
        for g in range(3):
            if a[2 * g] != n:
                return s.two_qubit_layer(a[2 * g], (a[2 * g] + a[2 * g + 1]) % n) < s.max_layers
        return s.moments[a[6]] < s.max_layers

    def legal_mask(self) -> np.ndarray:
        mask = np.array([self._fits(i) for i in range(self.n_actions)], dtype=bool)
        if self.config.mask_repeats and self.prev_action is not None and mask.sum() > 1:
            mask[self.prev_action] = False
        return mask

    def circuit(self) -> list:
        specs = placements(self.state.tensor, self.config.encoding)
        thetas = [self.thetas.get(p[:3], 0.0) for p in specs if p[3].parameterized]
        return build_circuit(self.state.tensor, self.config.encoding, thetas)

    def evaluate(self) -> float:
        specs = placements(self.state.tensor, self.config.encoding)
        template = [p[3] for p in specs]
        keys = [p[:3] for p in specs if p[3].parameterized]
        warm = np.array([self.thetas.get(k, 0.0) for k in keys])
        cost = self._cost_function(template)
        theta, value = optimize_parameters(cost, self.config.optimizer, warm)
        self.optimizer_calls += cost.calls
        self.thetas = dict(zip(keys, (float(x) for x in theta)))
        return value

    def step(self, action: int):
        if self.done:
            raise EpisodeOver("episode already finished; call reset()")
        a = int(action)
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} outside [0, {self.n_actions})")
        self._encode(self.state, self.actions[a])
        self.prev_action = a
        self.t += 1
        cfg = self.config
        final = self.t >= cfg.max_steps or not self.legal_mask().any()
        info = {"evaluated": False, "success": False}
        if not (self.t % cfg.m == 0 or final):
            return self.observation(), 0.0, self.done, info
        cost = self.evaluate()
        error = cost - self.exact_energy
        self.evaluations.append(Evaluation(self.t, cost, error))
        info.update(evaluated=True, cost=cost, error=error)
        if error < self.curriculum.xi:
            reward, self.done, self.success = SUCCESS_REWARD, True, True
            info["success"] = True
        elif final:
            reward, self.done = FAILURE_REWARD, True
        else:
            reward = qas_reward(self.last_eval_cost, cost, self.c_min)
        self.last_eval_cost = cost
        return self.observation(), reward, self.done, info

    def end_episode(self) -> dict:
        stats = episode_stats(self)
        self.curriculum.update(self.success, stats["min_error"])
        return stats


def qas_reward(prev_cost: float, cost: float, c_min: float) -> float:
    """Improvement relative to the remaining gap, clamped to [-1, 1]."""
    gap = prev_cost - c_min
    if gap <= 1e-12:
        return 0.0
    return float(min(1.0, max((prev_cost - cost) / gap, -1.0)))


def evaluation_steps(episode_len: int, m: int) -> list:
    """Steps at which an episode of ``episode_len`` steps evaluates the energy."""
    return [t for t in range(1, episode_len + 1) if t % m == 0 or t == episode_len]


def gate_counts(tensor: np.ndarray) -> tuple:
    n = tensor.shape[2]
    two = int(np.count_nonzero(tensor[:, :n, :]))
    rot = int(np.count_nonzero(tensor[:, n:, :]))
    return two, rot


def episode_stats(env: QasEnv) -> dict:
    two, rot = gate_counts(env.state.tensor)
    if env.evaluations:
        min_error = min(e.error for e in env.evaluations)
        best_cost = min(e.cost for e in env.evaluations)
    else:
        best_cost = env.empty_cost
        min_error = env.empty_cost - env.exact_energy
    return {"total_gates": two + rot, "cnot_count": two, "rot_count": rot,
            "min_error": float(min_error), "best_cost": float(best_cost),
            "evals": len(env.evaluations), "steps": env.t}


EPISODE_COLUMNS = ("episode", "steps", "evals", "best_cost", "error_vs_exact", "total_gates",
                   "cnot", "rot", "xi", "epsilon", "wall_ms")


class EpisodeLog:
    """Per-episode CSV rows (kept in memory, written on demand)."""

    def __init__(self):
        self.rows: list = []
        self._t0 = time.perf_counter()

    def record(self, episode: int, stats: dict, xi: float, epsilon: float) -> None:
        wall = (time.perf_counter() - self._t0) * 1000.0
        self.rows.append((episode, stats["steps"], stats["evals"], stats["best_cost"],
                          stats["min_error"], stats["total_gates"], stats["cnot_count"],
                          stats["rot_count"], xi, epsilon, round(wall, 3)))

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EPISODE_COLUMNS)
            w.writerows(self.rows)
