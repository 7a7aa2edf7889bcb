"""Pure replay formulas: TD targets, reliability, omega annealing, priorities."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Strategy(str, enum.Enum):
    UNIFORM = "uniform"
    HER = "her"
    PER = "per"
    REAPER = "reaper"
    REAPER_PLUS = "reaper_plus"

    @property
    def prioritized(self) -> bool:
        return self in (Strategy.PER, Strategy.REAPER, Strategy.REAPER_PLUS)

    @property
    def reliability_aware(self) -> bool:
        return self in (Strategy.REAPER, Strategy.REAPER_PLUS)


@dataclass(frozen=True)
class PrioritySpec:
    alpha: float = 0.6
    omega: float = 0.2
    beta0: float = 0.4
    beta_anneal_frames: int = 100_000
    epsilon_priority: float = 1e-6

    def __post_init__(self):
        for name in ("alpha", "omega", "beta0", "epsilon_priority"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.omega <= 1.0 or not 0.0 <= self.beta0 <= 1.0:
            raise ValueError("omega and beta0 must lie in [0, 1]")
        if self.epsilon_priority <= 0:
            raise ValueError("epsilon_priority must be > 0")

    def beta_at(self, frame: int) -> float:
        if self.beta_anneal_frames <= 0:
            return 1.0
        frac = min(frame / self.beta_anneal_frames, 1.0)
        return self.beta0 + (1.0 - self.beta0) * frac


@dataclass(frozen=True)
class OmegaSchedule:
    omega_min: float = 0.1
    omega_max: float = 0.7
    t_ann: int = 500_000

    def __post_init__(self):
        if not 0.0 <= self.omega_min <= self.omega_max <= 1.0:
            raise ValueError("need 0 <= omega_min <= omega_max <= 1")
        if self.t_ann <= 0:
            raise ValueError("t_ann must be positive")


def td_target(reward: float, done, gamma: float, max_next_q: float) -> float:
    return reward + gamma * (1.0 - float(done)) * max_next_q


def reliability_scores(td_plus) -> np.ndarray:
    """Per-episode reliability: one minus the share of TD error still ahead.

    An episode whose errors are all zero is treated as fully reliable.
    """
    d = np.asarray(td_plus, dtype=float)
    if np.isnan(d).any():
        raise ValueError("NaN in TD errors")
    if (d < 0).any():
        raise ValueError("TD error magnitudes must be non-negative")
    total = d.sum()
    if d.size == 0:
        return d.copy()
    if total == 0.0:
        return np.ones_like(d)
    # errors strictly after t: total - cumsum[t]
    behind = np.cumsum(d)
    out = behind / total
    out[-1] = 1.0
    return out


def omega_at(schedule: OmegaSchedule, tau: int) -> float:
    if tau < 0:
        raise ValueError("tau must be >= 0")
    frac = min(tau / schedule.t_ann, 1.0)
    return schedule.omega_min + (schedule.omega_max - schedule.omega_min) * frac


def priorities(strategy, td_plus, reliability, spec: PrioritySpec,
               omega_now: float | None = None):
    """Unnormalized priorities ``psi`` and sampling probabilities ``mu``."""
    strategy = Strategy(strategy)
    d = np.asarray(td_plus, dtype=float)
    if d.size == 0:
        raise ValueError("empty priority vector")
    if (d < 0).any() or np.isnan(d).any():
        raise ValueError("TD error magnitudes must be non-negative")
    if strategy in (Strategy.UNIFORM, Strategy.HER):
        psi = np.ones_like(d)
    else:
        psi = (d + spec.epsilon_priority) ** spec.alpha
        if strategy.reliability_aware:
            r = np.asarray(reliability, dtype=float)
            if r.shape != d.shape:
                raise ValueError("reliability and TD vectors differ in length")
            if (r < 0).any() or np.isnan(r).any():
                raise ValueError("reliability scores must be non-negative")
            omega = spec.omega if strategy is Strategy.REAPER else omega_now
            if omega is None:
                raise ValueError("reaper_plus needs the current omega")
            psi = reliability_weight(r, omega, spec.epsilon_priority) * psi
    return psi, psi / psi.sum()


def reliability_weight(reliability, omega: float, floor: float) -> np.ndarray:
    # the floor keeps the first transition of an episode sampleable when its own error is 0
    return np.maximum(np.asarray(reliability, dtype=float), floor) ** omega
