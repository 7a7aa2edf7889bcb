"""Action selection, bootstrap targets, n-step folding and schedules."""
from __future__ import annotations

from collections import deque
from typing import Optional

import numpy as np

from ..replay.buffer import Transition


def masked_argmax(q, legal_mask=None) -> int:
    q = np.asarray(q, dtype=float)
    if legal_mask is None:
        return int(np.argmax(q))  # first maximum wins
    mask = np.asarray(legal_mask, dtype=bool)
    if not mask.any():
        raise ValueError("no legal action")
    return int(np.argmax(np.where(mask, q, -np.inf)))


def select_action(net, state, epsilon: float, legal_mask, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the legal actions; greedy ties go to the lowest index."""
    n = net.output_dim
    mask = np.ones(n, dtype=bool) if legal_mask is None else np.asarray(legal_mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask must have {n} entries")
    if not mask.any():
        raise ValueError("no legal action")
    if rng.random() < epsilon:
        return int(rng.choice(np.flatnonzero(mask)))
    return masked_argmax(net.forward(state), mask)


def compute_target(rewards, dones, next_states, online, target, gamma: float,
                   double_q: bool, next_masks=None) -> np.ndarray:
    """Bootstrapped targets; ``gamma`` may be per-sample for n-step transitions."""
    rewards = np.asarray(rewards, dtype=float)
    alive = 1.0 - np.asarray(dones, dtype=float)
    q_next = target.forward_batch(next_states)
    if next_masks is not None:
        masks = np.asarray(next_masks, dtype=bool)
        # states with nothing legal are terminal in effect
        masks = np.where(masks.any(axis=1, keepdims=True), masks, True)
    else:
        masks = None
    if double_q:
        q_sel = online.forward_batch(next_states)
        if masks is not None:
            q_sel = np.where(masks, q_sel, -np.inf)
        pick = np.argmax(q_sel, axis=1)
        boot = q_next[np.arange(q_next.shape[0]), pick]
    else:
        if masks is not None:
            q_next = np.where(masks, q_next, -np.inf)
        boot = q_next.max(axis=1)
    boot = np.where(alive > 0, boot, 0.0)
    return rewards + np.asarray(gamma, dtype=float) * alive * boot


def decay_epsilon(eps: float, eps_min: float, decay: float) -> float:
    return max(eps_min, eps * decay)


class NStepAccumulator:
    """Folds consecutive transitions of one episode into n-step transitions.

    Emitted transitions carry the discounted reward sum in ``reward`` and keep
    the step index of their first transition.  Short windows are only emitted
    at a terminal step, so bootstrapping with ``gamma**n`` is always right.
    """

    def __init__(self, n: int, gamma: float):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n, self.gamma = n, gamma
        self.window: deque = deque()
        self.episode_id: Optional[int] = None

    def __len__(self):
        return len(self.window)

    def _fold(self) -> Transition:
        first, last = self.window[0], self.window[-1]
        ret = 0.0
        for k, tr in enumerate(self.window):
            ret += self.gamma ** k * tr.reward
        folded = Transition(first.state, first.action, ret, last.next_state, last.done,
                            first.episode_id, first.step, first.goal)
        self.window.popleft()
        return folded

    def push(self, tr: Transition) -> list:
        if self.episode_id is not None and self.window and tr.episode_id != self.episode_id:
            raise ValueError("transition from a different episode; flush first")
        self.episode_id = tr.episode_id
        self.window.append(tr)
        out = []
        if tr.done:
            out = self.flush()
        elif len(self.window) == self.n:
            out.append(self._fold())
        return out

    def flush(self) -> list:
        """Emit every pending window with its remaining horizon."""
        out = []
        while self.window:
            out.append(self._fold())
        self.episode_id = None
        return out
