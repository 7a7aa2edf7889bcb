"""Hindsight relabeling with the "future" goal strategy."""
from __future__ import annotations

from dataclasses import replace
from typing import Callable, Optional, Sequence

import numpy as np

from .buffer import Transition


class RelabelError(ValueError):
    pass


def her_relabel(transitions: Sequence[Transition], k: int,
                reward_fn: Callable, achieved_fn: Callable, rng: np.random.Generator,
                restate_fn: Optional[Callable] = None) -> list:
    """Relabeled copies of an episode's transitions.

    For step ``t`` up to ``k`` goals are drawn with replacement from the
    goals achieved at steps ``t..T-1`` (a transition's own outcome counts).

    ``achieved_fn(tr)`` gives the goal reached after ``tr``;
    ``reward_fn(tr, goal)`` returns ``(reward, done)`` under the new goal;
    ``restate_fn(tr, goal)`` optionally returns ``(state, next_state)`` when
    the observation itself depends on the goal.
    """
    if k < 0:
        raise RelabelError("k must be >= 0")
    if not transitions or k == 0:
        return []
    if any(tr.goal is None for tr in transitions):
        raise RelabelError("episode transitions carry no goal")
    achieved = [np.asarray(achieved_fn(tr)) for tr in transitions]
    out = []
    n = len(transitions)
    for t, tr in enumerate(transitions):
        picks = rng.integers(t, n, size=k)
        for j in picks:
            goal = achieved[int(j)]
            try:
                reward, done = reward_fn(tr, goal)
            except Exception as exc:
                raise RelabelError(f"reward function failed at step {t}: {exc}") from exc
            fields = dict(goal=goal.copy(), reward=float(reward), done=bool(done))
            if restate_fn is not None:
                fields["state"], fields["next_state"] = restate_fn(tr, goal)
            out.append(replace(tr, **fields))
    return out
