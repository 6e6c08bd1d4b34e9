"""Bounded transition store with proportional prioritized sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, PreconditionError, ShapeError


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    goal: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    is_virtual: bool = False


class SumTree:
    """Array-backed binary tree whose internal nodes hold the sum of their leaves.

    Node ``1`` is the root, node ``i`` has children ``2i`` and ``2i + 1`` and
    leaf ``j`` lives at ``base + j``. Updates accept whole index batches and
    recompute each touched parent from its two children, so every internal
    node is an exact sum of its children after every call.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("capacity must be at least 1")
        self.capacity = int(capacity)
        self.base = 1 << max(0, (self.capacity - 1).bit_length())
        self.depth = self.base.bit_length() - 1
        self.nodes = np.zeros(2 * self.base)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    @property
    def leaves(self) -> np.ndarray:
        return self.nodes[self.base:self.base + self.capacity]

    def update(self, indices, values):
        idx = np.asarray(indices, dtype=np.int64).ravel() + self.base
        self.nodes[idx] = np.asarray(values, dtype=np.float64).ravel()
        parents = np.unique(idx >> 1)
        while parents.size and parents[0] >= 1:
            self.nodes[parents] = self.nodes[2 * parents] + self.nodes[2 * parents + 1]
            if parents[0] == 1:
                break
            parents = np.unique(parents >> 1)

    def find(self, masses) -> np.ndarray:
        """Leaf indices ``j`` with ``sum(leaves[:j]) <= mass < sum(leaves[:j + 1])``."""
        mass = np.array(masses, dtype=np.float64, ndmin=1)
        node = np.ones(mass.shape, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * node
            left_sum = self.nodes[left]
            right = mass >= left_sum
            mass = np.where(right, mass - left_sum, mass)
            node = np.where(right, left + 1, left)
        return node - self.base


class PrioritizedReplay:
    """Ring buffer of transitions sampled in proportion to ``priority ** alpha``.

    Leaf values are stored already raised to ``alpha``. New transitions enter
    with the largest leaf value seen so far so they are replayed at least once
    with high probability.
    """

    FIELDS = (
        "observation", "goal", "action", "reward", "next_observation",
        "achieved_goal", "next_achieved_goal", "is_virtual",
    )

    def __init__(self, capacity, observation_dim, goal_dim, action_dim,
                 alpha=0.6, beta=0.4, priority_floor=1e-3):
        if alpha < 0 or priority_floor <= 0:
            raise ConfigurationError("alpha must be >= 0 and priority_floor > 0")
        self.capacity = int(capacity)
        self.observation_dim = int(observation_dim)
        self.goal_dim = int(goal_dim)
        self.action_dim = int(action_dim)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.priority_floor = float(priority_floor)
        self.max_priority_seen = 1.0
        self.tree = SumTree(self.capacity)
        self.head = 0
        self.size = 0
        self.n_stored = 0
        c = self.capacity
        self.observation = np.zeros((c, self.observation_dim))
        self.goal = np.zeros((c, self.goal_dim))
        self.action = np.zeros((c, self.action_dim))
        self.reward = np.zeros(c)
        self.next_observation = np.zeros((c, self.observation_dim))
        self.achieved_goal = np.zeros((c, self.goal_dim))
        self.next_achieved_goal = np.zeros((c, self.goal_dim))
        self.is_virtual = np.zeros(c, dtype=bool)

    def __len__(self):
        return self.size

    def _check(self, name, arr, width, n):
        if arr.shape != (n, width):
            raise ShapeError(f"{name} has shape {arr.shape}, expected {(n, width)}")

    def store(self, t: Transition) -> int:
        return int(self.store_batch(
            observation=[t.observation], goal=[t.goal], action=[t.action],
            reward=[t.reward], next_observation=[t.next_observation],
            achieved_goal=[t.achieved_goal], next_achieved_goal=[t.next_achieved_goal],
            is_virtual=[t.is_virtual],
        )[0])

    def store_batch(self, observation, goal, action, reward, next_observation,
                    achieved_goal, next_achieved_goal, is_virtual) -> np.ndarray:
        """Append rows in order, evicting the oldest ones; returns their slots."""
        reward = np.asarray(reward, dtype=np.float64).ravel()
        n = reward.shape[0]
        arrays = {
            "observation": (np.asarray(observation, dtype=np.float64), self.observation_dim),
            "goal": (np.asarray(goal, dtype=np.float64), self.goal_dim),
            "action": (np.asarray(action, dtype=np.float64), self.action_dim),
            "next_observation": (np.asarray(next_observation, dtype=np.float64), self.observation_dim),
            "achieved_goal": (np.asarray(achieved_goal, dtype=np.float64), self.goal_dim),
            "next_achieved_goal": (np.asarray(next_achieved_goal, dtype=np.float64), self.goal_dim),
        }
        for name, (arr, width) in arrays.items():
            self._check(name, arr, width, n)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        if n > self.capacity:
            raise PreconditionError("batch larger than buffer capacity")
        slots = (self.head + np.arange(n)) % self.capacity
        for name, (arr, _) in arrays.items():
            getattr(self, name)[slots] = arr
        self.reward[slots] = reward
        self.is_virtual[slots] = np.broadcast_to(np.asarray(is_virtual, dtype=bool).ravel(), (n,))
        self.tree.update(slots, np.full(n, self.max_priority_seen))
        self.head = int((self.head + n) % self.capacity)
        self.size = min(self.size + n, self.capacity)
        self.n_stored += n
        return slots

    def transition(self, i: int) -> Transition:
        return Transition(*(getattr(self, f)[i].copy() if f not in ("reward", "is_virtual")
                            else getattr(self, f)[i].item() for f in self.FIELDS))

    def sample(self, k: int, rng):
        """Stratified proportional sample of ``k`` slots.

        Returns ``(batch, indices, weights)``: a dict of field arrays, the
        slot indices, and importance weights ``(N * P(i)) ** -beta`` divided
        by their maximum.
        """
        if k < 1 or k > self.size:
            raise PreconditionError(f"cannot sample {k} transitions from a buffer of {self.size}")
        total = self.tree.total
        bounds = np.linspace(0.0, total, k + 1)
        mass = bounds[:-1] + rng.random(k) * (bounds[1:] - bounds[:-1])
        idx = np.clip(self.tree.find(np.minimum(mass, np.nextafter(total, 0.0))), 0, self.size - 1)
        probs = self.tree.leaves[idx] / total
        weights = (self.size * probs) ** (-self.beta)
        weights /= weights.max()
        return self.batch(idx), idx, weights

    def batch(self, idx) -> dict:
        return {f: getattr(self, f)[idx] for f in self.FIELDS}

    def update_priorities(self, indices, td_errors):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        td = np.abs(np.asarray(td_errors, dtype=np.float64).ravel())
        if idx.shape != td.shape:
            raise ShapeError("indices and td_errors differ in length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise PreconditionError("priority update for an empty or out-of-range slot")
        leaf = (td + self.priority_floor) ** self.alpha
        self.tree.update(idx, leaf)
        if leaf.size:
            self.max_priority_seen = max(self.max_priority_seen, float(leaf.max()))

    def order(self) -> np.ndarray:
        """Occupied slots from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (self.head + np.arange(self.capacity)) % self.capacity

    def dump_csv(self, path):
        """Write ``achieved_goal, next_achieved_goal, goal, reward, is_virtual`` rows, oldest first."""
        g = self.goal_dim
        header = ",".join(
            [f"achieved_goal_{i}" for i in range(g)]
            + [f"next_achieved_goal_{i}" for i in range(g)]
            + [f"goal_{i}" for i in range(g)]
            + ["reward", "is_virtual"]
        )
        idx = self.order()
        table = np.column_stack([
            self.achieved_goal[idx], self.next_achieved_goal[idx], self.goal[idx],
            self.reward[idx], self.is_virtual[idx].astype(np.float64),
        ]) if idx.size else np.zeros((0, 3 * g + 2))
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
        return path


def read_buffer_dump(path) -> dict:
    """Load a dump written by :meth:`PrioritizedReplay.dump_csv` into column arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(header)))

    def cols(prefix):
        return data[:, [i for i, h in enumerate(header) if h.rsplit("_", 1)[0] == prefix]]

    return {
        "achieved_goal": cols("achieved_goal"),
        "next_achieved_goal": cols("next_achieved_goal"),
        "goal": cols("goal"),
        "reward": data[:, header.index("reward")],
        "is_virtual": data[:, header.index("is_virtual")].astype(bool),
    }
