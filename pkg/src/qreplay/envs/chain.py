"""Small 1-D chain MDP for checking learners against exact values.

Positions ``0..length-1``; the walk starts at 0 and the episode terminates
with reward 1 on reaching the goal (by default the far end).  Action 0
moves left, action 1 right; with probability ``slip`` the chosen move is
replaced by a uniformly random one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..replay.buffer import Transition


@dataclass(frozen=True)
class ChainConfig:
    length: int = 8
    slip: float = 0.0
    max_steps: int = 50

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("chain length must be >= 2")
        if not 0.0 <= self.slip <= 1.0:
            raise ValueError("slip must lie in [0, 1]")


class ChainEnv:
    n_actions = 2

    def __init__(self, config: ChainConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.rng = rng or np.random.default_rng()
        self.goal_pos = config.length - 1
        self.pos = 0
        self.t = 0
        self.done = True

    @property
    def obs_dim(self) -> int:
        return 2 * self.config.length

    def one_hot(self, i: int) -> np.ndarray:
        v = np.zeros(self.config.length)
        v[i] = 1.0
        return v

    def observe(self, pos: int, goal: int) -> np.ndarray:
        return np.concatenate([self.one_hot(pos), self.one_hot(goal)])

    def observation(self) -> np.ndarray:
        return self.observe(self.pos, self.goal_pos)

    @property
    def goal(self) -> np.ndarray:
        return self.one_hot(self.goal_pos)

    def reset(self, goal: Optional[int] = None) -> np.ndarray:
        self.goal_pos = self.config.length - 1 if goal is None else int(goal)
        self.pos = 0
        self.t = 0
        self.done = self.pos == self.goal_pos
        return self.observation()

    def legal_mask(self) -> np.ndarray:
        return np.ones(2, dtype=bool)

    def step(self, action: int):
        if self.done:
            raise RuntimeError("episode already finished; call reset()")
        a = int(action)
        if a not in (0, 1):
            raise IndexError(f"action {a} outside [0, 2)")
        if self.config.slip > 0 and self.rng.random() < self.config.slip:
            a = int(self.rng.integers(2))
        self.pos = min(max(self.pos + (1 if a == 1 else -1), 0), self.config.length - 1)
        self.t += 1
        reached = self.pos == self.goal_pos
        truncated = not reached and self.t >= self.config.max_steps
        self.done = reached or truncated
        # truncation is not terminal for bootstrapping; the harness stores ``terminal``
        return self.observation(), float(reached), self.done, {
            "success": reached, "terminal": reached, "truncated": truncated}

    # -- hindsight hooks ---------------------------------------------------

    def _pos(self, vec) -> int:
        return int(np.argmax(np.asarray(vec)[:self.config.length]))

    def achieved_goal(self, tr: Transition) -> np.ndarray:
        return self.one_hot(self._pos(tr.next_state))

    def relabel_states(self, tr: Transition, goal):
        g = int(np.argmax(goal))
        return self.observe(self._pos(tr.state), g), self.observe(self._pos(tr.next_state), g)

    def relabel_reward(self, tr: Transition, goal):
        hit = self._pos(tr.next_state) == int(np.argmax(goal))
        return float(hit), hit


def chain_values(config: ChainConfig, gamma: float, tol: float = 1e-12) -> np.ndarray:
    """Optimal ``Q[s, a]`` for the default goal by value iteration (terminal goal has value 0)."""
    n = config.length
    goal = n - 1
    q = np.zeros((n, 2))
    moves = (-1, 1)
    while True:
        v = q.max(axis=1)
        v[goal] = 0.0
        new = np.zeros_like(q)
        for s in range(n - 1):
            for a in range(2):
                total = 0.0
                for actual, prob in ((a, 1.0 - config.slip), (0, config.slip / 2),
                                     (1, config.slip / 2)):
                    if prob == 0.0:
                        continue
                    s2 = min(max(s + moves[actual], 0), n - 1)
                    r = 1.0 if s2 == goal else 0.0
                    total += prob * (r + (0.0 if s2 == goal else gamma * v[s2]))
                new[s, a] = total
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new
