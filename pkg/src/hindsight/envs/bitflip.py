"""Bit-flipping task with an extra action that ends the episode without
touching the bits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from .base import GoalEnv, as_rng


@dataclass(frozen=True)
class BitFlipConfig:
    n_bits: int = 8
    horizon: int | None = None     # defaults to n_bits + 2


@dataclass(frozen=True)
class BitFlipState:
    bits: tuple
    terminated: bool = False
    steps: int = 0


class BitFlipEnv(GoalEnv):
    """``n`` bits; action ``i < n`` flips bit ``i`` and action ``n`` terminates.

    Continuous action vectors of length ``n + 1`` are decoded by argmax, so
    the same actor-critic agent drives this task.
    """

    name = "bitflip"
    discrete_actions = True

    def __init__(self, config: BitFlipConfig | None = None, **overrides):
        self.config = config or BitFlipConfig(**overrides)
        n = self.config.n_bits
        if n < 1:
            raise ConfigurationError("n_bits must be at least 1")
        self.n_bits = n
        self.horizon = self.config.horizon if self.config.horizon is not None else n + 2
        self.observation_dim = n
        self.goal_dim = n
        self.action_dim = n + 1
        self.action_low = -np.ones(n + 1)
        self.action_high = np.ones(n + 1)
        self.binary_actions = np.zeros(n + 1, dtype=bool)
        self.success_epsilon = 0.5
        self.null_action = n

    def reset(self, seed=None):
        rng = as_rng(seed)
        bits = tuple(int(b) for b in rng.integers(0, 2, self.n_bits))
        goal = rng.integers(0, 2, self.n_bits).astype(np.float64)
        return BitFlipState(bits), goal

    def decode(self, action) -> int:
        if np.ndim(action) == 0:
            i = int(action)
        else:
            a = np.asarray(action, dtype=np.float64)
            if a.shape != (self.action_dim,):
                raise ShapeError(f"action vector must have length {self.action_dim}")
            i = int(np.argmax(a))
        if not 0 <= i <= self.n_bits:
            raise ShapeError(f"action index {i} out of range")
        return i

    def step(self, state: BitFlipState, action, goal):
        i = self.decode(action)
        bits = list(state.bits)
        terminated = state.terminated
        if i < self.n_bits:
            bits[i] = 1 - bits[i]
        else:
            terminated = True
        nxt = BitFlipState(tuple(bits), terminated, state.steps + 1)
        reward = self.reward(self.achieved_goal(nxt), goal)
        return nxt, reward, terminated or nxt.steps >= self.horizon

    def observe(self, state: BitFlipState) -> np.ndarray:
        return np.array(state.bits, dtype=np.float64)

    def achieved_goal(self, state: BitFlipState) -> np.ndarray:
        return np.array(state.bits, dtype=np.float64)

    def reward(self, achieved, desired):
        """0 on an exact bit match, else -1."""
        a = np.asarray(achieved, dtype=np.float64)
        d = np.asarray(desired, dtype=np.float64)
        if a.shape[-1] != self.goal_dim or d.shape[-1] != self.goal_dim:
            raise ShapeError(f"goals must have {self.goal_dim} bits")
        r = np.where(np.all(np.abs(a - d) < 0.5, axis=-1), 0.0, -1.0)
        return float(r) if r.ndim == 0 else r

    def distance(self, achieved, desired):
        """Hamming distance."""
        return np.sum(np.abs(np.asarray(achieved) - np.asarray(desired)) > 0.5, axis=-1).astype(float)
