"""DQN / double-DQN learner wired to a replay buffer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..replay.buffer import ReplayBuffer, Transition
from .network import Adam, QNetwork, clip_global_norm
from .policy import NStepAccumulator, compute_target, decay_epsilon, select_action


@dataclass
class AgentConfig:
    hidden: tuple = (128, 128)
    activation: str = "relu"
    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 200
    target_sync: int = 100
    target_sync_unit: str = "episodes"  # or "steps"
    grad_clip: float = 1.0
    eps_start: float = 1.0
    eps_min: float = 0.01
    eps_decay: float = 0.99931
    eps_decay_unit: str = "episodes"  # or "steps"
    n_step: int = 1
    double_q: bool = False
    loss: str = "huber"
    learn_start: int = 0
    train_every: int = 1
    updates_per_step: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.eps_min > self.eps_start:
            raise ValueError("eps_min must not exceed eps_start")
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if self.target_sync < 1 or self.batch_size < 1:
            raise ValueError("target_sync and batch_size must be positive")
        for unit in (self.target_sync_unit, self.eps_decay_unit):
            if unit not in ("episodes", "steps"):
                raise ValueError(f"unit must be 'episodes' or 'steps', got {unit!r}")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class LearnStats:
    updates: int = 0
    syncs: int = 0
    last_loss: float = float("nan")
    losses: list = field(default_factory=list)


class DQNAgent:
    def __init__(self, state_dim: int, n_actions: int, config: AgentConfig,
                 buffer: ReplayBuffer, rng: np.random.Generator):
        self.config = config
        self.n_actions = n_actions
        self.rng = rng
        sizes = [state_dim, *config.hidden, n_actions]
        self.online = QNetwork(sizes, config.activation, rng)
        self.target = self.online.clone()
        self.optimizer = Adam(self.online.params(), lr=config.lr)
        self.buffer = buffer
        self.epsilon = config.eps_start
        self.nstep = NStepAccumulator(config.n_step, config.gamma)
        self.steps = 0
        self.episodes = 0
        self.stats = LearnStats()

    # -- acting --------------------------------------------------------------

    def act(self, state, legal_mask=None, greedy: bool = False) -> int:
        eps = 0.0 if greedy else self.epsilon
        return select_action(self.online, state, eps, legal_mask, self.rng)

    def observe(self, tr: Transition) -> list:
        """Record one environment step; returns the buffer slots written."""
        slots = [self.buffer.add(t) for t in self.nstep.push(tr)]
        self.steps += 1
        if self.config.eps_decay_unit == "steps":
            self._decay()
        if self.config.target_sync_unit == "steps" and self.steps % self.config.target_sync == 0:
            self.sync_target()
        if (len(self.buffer) >= max(self.config.batch_size, self.config.learn_start)
                and self.steps % self.config.train_every == 0):
            for _ in range(self.config.updates_per_step):
                self.learn()
        return slots

    def end_episode(self, episode_id: int, extra=()) -> None:
        """Flush n-step windows, add any extra (e.g. relabeled) transitions, refresh reliability."""
        for t in self.nstep.flush():
            self.buffer.add(t)
        for t in extra:
            self.buffer.add(t)
        ids = {episode_id} | {t.episode_id for t in extra}
        for eid in ids:
            if eid in self.buffer.episode_index:
                self.buffer.end_episode(eid)
        self.episodes += 1
        if self.config.eps_decay_unit == "episodes":
            self._decay()
        if (self.config.target_sync_unit == "episodes"
                and self.episodes % self.config.target_sync == 0):
            self.sync_target()

    def _decay(self):
        self.epsilon = decay_epsilon(self.epsilon, self.config.eps_min, self.config.eps_decay)

    def sync_target(self) -> None:
        self.target.copy_from(self.online)
        self.stats.syncs += 1

    # -- learning ------------------------------------------------------------

    def learn(self) -> float:
        cfg = self.config
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        states = batch.states.astype(float)
        next_states = batch.next_states.astype(float)
        targets = compute_target(batch.rewards.astype(float), batch.dones, next_states,
                                 self.online, self.target, cfg.gamma ** cfg.n_step, cfg.double_q)
        loss, grads, td = self.online.loss_and_grad(states, batch.actions, targets,
                                                    batch.weights, loss=cfg.loss)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss")
        clip_global_norm(grads, cfg.grad_clip)
        self.optimizer.step(self.online.params(), grads)
        self.buffer.update_td(batch.indices, np.abs(td))
        self.stats.updates += 1
        self.stats.last_loss = loss
        return loss

    def greedy_values(self, states) -> np.ndarray:
        return self.online.forward_batch(states)
