"""Ring-buffer experience replay with uniform, HER, PER, ReaPER and ReaPER+ sampling."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .priorities import (
    OmegaSchedule, PrioritySpec, Strategy, omega_at, reliability_scores, reliability_weight,
)
from .sumtree import SumTree


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    episode_id: int = 0
    step: int = 1
    goal: Optional[np.ndarray] = None


@dataclass
class Episode:
    transitions: list = field(default_factory=list)
    td_plus: list = field(default_factory=list)
    truncated: bool = False


@dataclass
class Batch:
    indices: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    weights: np.ndarray
    goals: Optional[np.ndarray] = None

    def __len__(self):
        return self.indices.size


class BufferError(ValueError):
    pass


class ReplayBuffer:
    """Fixed-capacity FIFO replay memory.

    Payloads are kept as float32 so that the on-disk format round-trips
    bit-exactly.  For prioritized strategies a :class:`SumTree` over the
    slots drives proportional sampling; new transitions enter at the
    current maximum TD magnitude.
    """

    def __init__(self, capacity: int, state_dim: int, strategy="uniform",
                 spec: PrioritySpec | None = None, schedule: OmegaSchedule | None = None,
                 action_count: int = 0, goal_dim: int = 0, env_id: str = "",
                 omega_refresh_tol: float = 1e-3):
        if capacity < 1:
            raise BufferError("capacity must be positive")
        self.strategy = Strategy(strategy)
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.action_count = int(action_count)
        self.goal_dim = int(goal_dim)
        self.env_id = env_id
        self.spec = spec or PrioritySpec()
        if self.strategy is Strategy.REAPER_PLUS and schedule is None:
            schedule = OmegaSchedule()
        self.schedule = schedule
        self.omega_refresh_tol = omega_refresh_tol

        self.states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.next_states = np.zeros((capacity, state_dim), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.uint8)
        self.episode_ids = np.zeros(capacity, dtype=np.int64)
        self.steps = np.zeros(capacity, dtype=np.int64)
        self.goals = np.zeros((capacity, goal_dim), dtype=np.float32) if goal_dim else None
        self.td_plus = np.zeros(capacity)
        self.reliability = np.ones(capacity)

        self.tree = SumTree(capacity) if self.strategy.prioritized else None
        self.episode_index: dict = {}
        self._stale: set = set()
        self.size = 0
        self.cursor = 0
        self.frame = 0  # tau: transitions added since creation or transfer
        self.max_td = 1.0
        self._next_episode = 0
        self._tree_omega = None

    def __len__(self):
        return self.size

    # -- bookkeeping -------------------------------------------------------

    def new_episode_id(self) -> int:
        eid = self._next_episode
        self._next_episode += 1
        return eid

    def omega_now(self) -> float:
        if self.strategy is Strategy.REAPER_PLUS:
            return omega_at(self.schedule, self.frame)
        return self.spec.omega

    def beta_now(self) -> float:
        return self.spec.beta_at(self.frame)

    def _priority(self, slots, omega=None) -> np.ndarray:
        psi = (self.td_plus[slots] + self.spec.epsilon_priority) ** self.spec.alpha
        if self.strategy.reliability_aware:
            omega = self.omega_now() if omega is None else omega
            psi = psi * reliability_weight(self.reliability[slots], omega,
                                           self.spec.epsilon_priority)
        return psi

    def logical_order(self) -> np.ndarray:
        """Live slots from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self.cursor) % self.capacity

    # -- insertion ---------------------------------------------------------

    def add(self, t: Transition) -> int:
        state = np.asarray(t.state, dtype=np.float32)
        if state.shape != (self.state_dim,) or np.shape(t.next_state) != (self.state_dim,):
            raise BufferError(f"state dimension must be {self.state_dim}")
        if self.action_count and not 0 <= int(t.action) < self.action_count:
            raise BufferError(f"action {t.action} outside [0, {self.action_count})")
        slot = self.cursor
        if self.size == self.capacity:
            self._evict(slot)
        self.states[slot] = state
        self.next_states[slot] = t.next_state
        self.actions[slot] = int(t.action)
        self.rewards[slot] = t.reward
        self.dones[slot] = 1 if t.done else 0
        self.episode_ids[slot] = int(t.episode_id)
        self.steps[slot] = int(t.step)
        if self.goals is not None:
            if t.goal is None:
                raise BufferError("this buffer stores goals; transition has none")
            self.goals[slot] = t.goal
        self.td_plus[slot] = self.max_td
        self.reliability[slot] = 1.0
        self.episode_index.setdefault(int(t.episode_id), deque()).append(slot)
        self._next_episode = max(self._next_episode, int(t.episode_id) + 1)
        if self.tree is not None:
            self.tree.update(slot, float(self._priority([slot])[0]))
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.frame += 1
        return slot

    def _evict(self, slot: int) -> None:
        eid = int(self.episode_ids[slot])
        slots = self.episode_index.get(eid)
        if slots:
            # FIFO: the oldest member of the episode is the one being overwritten
            if slots[0] == slot:
                slots.popleft()
            else:
                slots.remove(slot)
            if not slots:
                del self.episode_index[eid]
                self._stale.discard(eid)
            elif self.strategy.reliability_aware:
                self._stale.add(eid)

    # -- priority maintenance ---------------------------------------------

    def _episode_slots(self, eid: int) -> np.ndarray:
        slots = np.fromiter(self.episode_index[eid], dtype=np.int64)
        return slots[np.argsort(self.steps[slots], kind="stable")]

    def _refresh_episodes(self, eids) -> None:
        """Recompute reliability for several episodes in one vectorized pass."""
        eids = [e for e in eids if e in self.episode_index]
        if not eids:
            return
        slots = np.concatenate([np.fromiter(self.episode_index[e], dtype=np.int64) for e in eids])
        slots = slots[np.lexsort((self.steps[slots], self.episode_ids[slots]))]
        self.reliability[slots] = segmented_reliability(self.td_plus[slots],
                                                        self.episode_ids[slots])
        self._stale.difference_update(eids)
        if self.tree is not None:
            self.tree.update_many(slots, self._priority(slots))

    def _refresh_episode(self, eid: int) -> None:
        self._refresh_episodes([eid])

    def end_episode(self, episode_id: int) -> np.ndarray:
        """Recompute reliability for a finished episode; returns its scores."""
        eid = int(episode_id)
        if eid not in self.episode_index:
            raise KeyError(f"unknown episode {eid}")
        if self.strategy.reliability_aware:
            self._refresh_episode(eid)
        else:
            slots = self._episode_slots(eid)
            self.reliability[slots] = reliability_scores(self.td_plus[slots])
        return self.reliability[self._episode_slots(eid)].copy()

    def update_td(self, indices, new_td_plus) -> None:
        idx = np.asarray(indices, dtype=np.int64)
        vals = np.asarray(new_td_plus, dtype=float)
        if idx.shape != vals.shape:
            raise BufferError("indices and TD values differ in length")
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.size:
            raise IndexError("index outside the live buffer")
        if (vals < 0).any() or not np.isfinite(vals).all():
            raise BufferError("TD magnitudes must be finite and >= 0")
        self.td_plus[idx] = vals
        self.max_td = max(self.max_td, float(vals.max()))
        if self.strategy.reliability_aware:
            self._stale.update(int(e) for e in np.unique(self.episode_ids[idx]))
        if self.tree is not None:
            self.tree.update_many(idx, self._priority(idx))

    def _maybe_refresh_omega(self) -> None:
        omega = self.omega_now()
        if self._tree_omega is None or abs(omega - self._tree_omega) > self.omega_refresh_tol:
            order = np.arange(self.size)
            self.tree.rebuild(self._priority(order, omega))
            self._tree_omega = omega

    def sampling_probabilities(self) -> np.ndarray:
        """Exact current ``mu`` over live slots (slot order)."""
        if self.size == 0:
            raise BufferError("empty buffer")
        if self.tree is None:
            return np.full(self.size, 1.0 / self.size)
        leaves = self.tree.leaves[:self.size]
        return leaves / leaves.sum()

    # -- sampling ------------------------------------------------------------

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise BufferError("cannot sample from an empty buffer")
        if batch_size > self.size:
            raise BufferError(f"batch of {batch_size} exceeds buffer size {self.size}")
        if self.tree is None:
            idx = rng.integers(self.size, size=batch_size)
            weights = np.ones(batch_size)
        else:
            if self.strategy is Strategy.REAPER_PLUS:
                self._maybe_refresh_omega()
            total = self.tree.total
            u = rng.random(batch_size) * total
            idx = self.tree.find(u)
            mu = self.tree.get(idx) / total
            w = (self.size * mu) ** (-self.beta_now())
            weights = w / w.max()
            if self._stale:
                touched = set(np.unique(self.episode_ids[idx]).tolist()) & self._stale
                self._refresh_episodes(sorted(touched))
        return Batch(
            indices=idx,
            states=self.states[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_states=self.next_states[idx],
            dones=self.dones[idx],
            weights=weights,
            goals=None if self.goals is None else self.goals[idx],
        )

    def transition(self, slot: int) -> Transition:
        return Transition(
            state=self.states[slot].copy(), action=int(self.actions[slot]),
            reward=float(self.rewards[slot]), next_state=self.next_states[slot].copy(),
            done=bool(self.dones[slot]), episode_id=int(self.episode_ids[slot]),
            step=int(self.steps[slot]),
            goal=None if self.goals is None else self.goals[slot].copy(),
        )

    def transitions(self) -> list:
        return [self.transition(int(s)) for s in self.logical_order()]


def segmented_reliability(td_plus: np.ndarray, episode_ids: np.ndarray) -> np.ndarray:
    """Reliability scores for consecutive runs of equal ``episode_ids``, each ordered by step."""
    d = np.asarray(td_plus, dtype=float)
    if d.size == 0:
        return d.copy()
    starts = np.flatnonzero(np.r_[True, episode_ids[1:] != episode_ids[:-1]])
    lengths = np.diff(np.r_[starts, d.size])
    totals = np.add.reduceat(d, starts)
    cs = np.cumsum(d)
    before = np.r_[0.0, cs][starts]
    seg_total = np.repeat(totals, lengths)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (cs - np.repeat(before, lengths)) / seg_total
    r = np.clip(r, 0.0, 1.0)
    r[starts + lengths - 1] = 1.0
    r[seg_total == 0.0] = 1.0
    return r


def transfer_buffer(source: ReplayBuffer, strategy=None, capacity: int | None = None,
                    spec: PrioritySpec | None = None, schedule: OmegaSchedule | None = None,
                    keep_priorities: bool = False, env_id: str | None = None) -> ReplayBuffer:
    """Initialize a target buffer with the source's transitions, unmodified.

    Payloads are copied in logical order.  Unless ``keep_priorities`` is set,
    every transferred transition starts at the same (maximum) priority with
    reliability 1 and the frame counter starts again from zero.
    """
    target = ReplayBuffer(
        capacity or source.capacity, source.state_dim,
        strategy=source.strategy if strategy is None else strategy,
        spec=spec or source.spec, schedule=schedule or source.schedule,
        action_count=source.action_count, goal_dim=source.goal_dim,
        env_id=source.env_id if env_id is None else env_id,
        omega_refresh_tol=source.omega_refresh_tol,
    )
    order = source.logical_order()
    if capacity is not None and order.size > capacity:
        order = order[-capacity:]
    k = order.size
    if k == 0:
        return target
    target.states[:k] = source.states[order]
    target.next_states[:k] = source.next_states[order]
    target.actions[:k] = source.actions[order]
    target.rewards[:k] = source.rewards[order]
    target.dones[:k] = source.dones[order]
    target.episode_ids[:k] = source.episode_ids[order]
    target.steps[:k] = source.steps[order]
    if target.goals is not None:
        target.goals[:k] = source.goals[order]
    target.size = k
    target.cursor = k % target.capacity
    for slot in range(k):
        target.episode_index.setdefault(int(target.episode_ids[slot]), deque()).append(slot)
    target._next_episode = int(target.episode_ids[:k].max()) + 1
    if keep_priorities:
        target.td_plus[:k] = source.td_plus[order]
        target.reliability[:k] = source.reliability[order]
        target.max_td = source.max_td
    else:
        target.td_plus[:k] = target.max_td
        target.reliability[:k] = 1.0
        if target.strategy.reliability_aware:
            target._stale.update(target.episode_index)
    if target.tree is not None:
        target.tree.rebuild(target._priority(np.arange(k)))
        target._tree_omega = target.omega_now()
    target.frame = 0
    return target
