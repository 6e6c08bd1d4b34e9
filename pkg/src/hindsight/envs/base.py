"""Goal-conditioned environment interface and lockstep episode rollouts."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from ..exceptions import ConfigurationError, ShapeError


def as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


class GoalEnv:
    """Pure-transition goal environment.

    Subclasses set the dimension attributes and implement ``reset``,
    ``step``, ``observe`` and ``achieved_goal``. ``step`` is a pure function
    of ``(state, action, goal)``; all randomness lives in ``reset``.
    """

    name = "abstract"
    observation_dim: int
    action_dim: int
    goal_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    binary_actions: np.ndarray
    discrete_actions = False    # actions are one-hot choices decoded by argmax
    success_epsilon: float
    horizon: int
    goal_distribution = None
    goal_bounds = None

    def reset(self, seed=None):
        raise NotImplementedError

    def step(self, state, action, goal):
        raise NotImplementedError

    def observe(self, state) -> np.ndarray:
        raise NotImplementedError

    def achieved_goal(self, state) -> np.ndarray:
        raise NotImplementedError

    def reward(self, achieved, desired):
        """0 where ``|achieved - desired| < success_epsilon``, else -1; broadcasts over rows."""
        a = np.asarray(achieved, dtype=np.float64)
        d = np.asarray(desired, dtype=np.float64)
        if a.shape[-1] != self.goal_dim or d.shape[-1] != self.goal_dim:
            raise ShapeError(f"goals must have {self.goal_dim} coordinates")
        dist = np.sqrt(np.sum((a - d) ** 2, axis=-1))
        r = np.where(dist < self.success_epsilon, 0.0, -1.0)
        return float(r) if r.ndim == 0 else r

    def distance(self, achieved, desired):
        a = np.asarray(achieved, dtype=np.float64)
        d = np.asarray(desired, dtype=np.float64)
        return np.sqrt(np.sum((a - d) ** 2, axis=-1))

    @property
    def action_range(self) -> np.ndarray:
        return self.action_high - self.action_low


@dataclass
class Episode:
    observations: np.ndarray
    actions: np.ndarray
    achieved_goals: np.ndarray
    rewards: np.ndarray
    goal: np.ndarray
    states: list

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def success(self) -> bool:
        return bool(np.any(self.rewards == 0.0))


def rollout(env: GoalEnv, act, starts) -> list[Episode]:
    """Run one episode per ``(state, goal)`` start, stepping all of them together.

    ``act`` maps an ``(B, observation_dim + goal_dim)`` batch to ``(B,
    action_dim)`` actions. Episodes that finish early drop out of the batch.
    """
    n = len(starts)
    states = [[s] for s, _ in starts]
    goals = [np.asarray(g, dtype=np.float64) for _, g in starts]
    actions = [[] for _ in range(n)]
    rewards = [[] for _ in range(n)]
    active = list(range(n))
    while active:
        batch = np.array([np.concatenate([env.observe(states[i][-1]), goals[i]]) for i in active])
        acts = np.asarray(act(batch), dtype=np.float64)
        still = []
        for row, i in enumerate(active):
            nxt, r, done = env.step(states[i][-1], acts[row], goals[i])
            states[i].append(nxt)
            actions[i].append(acts[row])
            rewards[i].append(r)
            if not done:
                still.append(i)
        active = still
    out = []
    for i in range(n):
        out.append(Episode(
            observations=np.array([env.observe(s) for s in states[i]]),
            actions=np.array(actions[i]),
            achieved_goals=np.array([env.achieved_goal(s) for s in states[i]]),
            rewards=np.array(rewards[i], dtype=np.float64),
            goal=goals[i],
            states=states[i],
        ))
    return out


def write_trace(path, env: GoalEnv, episode: Episode):
    """Episode trace CSV: ``t``, observation, action, reward, achieved goal per step.

    The final row holds the terminal observation with empty action and reward.
    """
    header = (["t"] + [f"obs_{i}" for i in range(env.observation_dim)]
              + [f"action_{i}" for i in range(env.action_dim)] + ["reward"]
              + [f"achieved_goal_{i}" for i in range(env.goal_dim)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(episode.length + 1):
            obs = [repr(float(v)) for v in episode.observations[t]]
            if t < episode.length:
                act = [repr(float(v)) for v in episode.actions[t]]
                rew = [repr(float(episode.rewards[t]))]
            else:
                act = [""] * env.action_dim
                rew = [""]
            ag = [repr(float(v)) for v in episode.achieved_goals[t]]
            w.writerow([t] + obs + act + rew + ag)
    return path


def config_from_dict(cls, values: dict):
    """Build a config dataclass, rejecting unknown keys and coercing sequences to tuples."""
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    clean = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return cls(**clean)
