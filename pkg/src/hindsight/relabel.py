"""Virtual-goal relabeling: future-goal candidates, misleading-sample filter
and instructiveness-weighted goal selection.

Instructiveness of a candidate goal is the gap between the target grid
``q*`` (kernel-smoothed goal density) and the proposal grid ``q`` (histogram
of virtual goals stored so far), floored so every cell keeps some mass::

    w(g) = max(q*(bin(g)) - q(bin(g)), weight_floor)
    p(g) = w(g) / sum of w over the candidate set
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, PreconditionError
from .goals import GridDistribution, GridSpec, build_target_grid

KEEP = "keep"
SKIP = "skip"

VARIANTS = {
    "her": (False, False),
    "her-ibs": (False, True),
    "filtered-her": (True, False),
    "filtered-her-ibs": (True, True),
}


@dataclass
class EpisodeTrajectory:
    observations: np.ndarray     # (T + 1, obs_dim)
    actions: np.ndarray          # (T, action_dim)
    achieved_goals: np.ndarray   # (T + 1, goal_dim)
    desired_goal: np.ndarray     # (goal_dim,)

    @property
    def horizon(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class HerConfig:
    k_virtual: int = 4
    strategy: str = "future"
    variant_filter: bool = False
    variant_ibs: bool = False

    def __post_init__(self):
        if self.k_virtual < 0:
            raise ConfigurationError("k_virtual must be non-negative")
        if self.strategy != "future":
            raise ConfigurationError(f"only the 'future' strategy is supported, got {self.strategy!r}")

    @classmethod
    def from_variant(cls, variant: str, k_virtual: int = 4) -> "HerConfig":
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
        filt, ibs = VARIANTS[variant]
        return cls(k_virtual=k_virtual, variant_filter=filt, variant_ibs=ibs)


@dataclass
class IbsState:
    grid: GridSpec
    goal_distribution: object
    target_q_star: GridDistribution
    proposal_counts: np.ndarray
    total_stored: int = 0
    sigma_sq: float = 2.0
    sigma_sq_init: float = 2.0
    sigma_sq_final: float = 0.2
    sigma_decay: float = 0.9
    anneal_period_cycles: int = 50
    weight_floor: float = 0.002
    target_floor: float = 0.002
    history: list = field(default_factory=list)

    @classmethod
    def create(cls, goal_distribution, grid: GridSpec, sigma_sq_init=2.0, sigma_sq_final=0.2,
               sigma_decay=0.9, anneal_period_cycles=50, weight_floor=0.002,
               target_floor=0.002) -> "IbsState":
        if not 0 < sigma_sq_final <= sigma_sq_init:
            raise ConfigurationError("need 0 < sigma_sq_final <= sigma_sq_init")
        if not 0 < sigma_decay <= 1 or anneal_period_cycles < 1:
            raise ConfigurationError("sigma_decay must be in (0, 1] and the anneal period positive")
        target = build_target_grid(goal_distribution, np.sqrt(sigma_sq_init), grid, target_floor)
        return cls(grid=grid, goal_distribution=goal_distribution, target_q_star=target,
                   proposal_counts=np.zeros(grid.shape, dtype=np.int64),
                   sigma_sq=sigma_sq_init, sigma_sq_init=sigma_sq_init,
                   sigma_sq_final=sigma_sq_final, sigma_decay=sigma_decay,
                   anneal_period_cycles=anneal_period_cycles, weight_floor=weight_floor,
                   target_floor=target_floor)


def candidate_goals(traj: EpisodeTrajectory, t: int) -> np.ndarray:
    """Achieved goals strictly after step ``t`` (the ``future`` strategy)."""
    if not 0 <= t < traj.horizon:
        raise PreconditionError(f"t={t} outside [0, {traj.horizon})")
    return traj.achieved_goals[t + 1:]


def proposal_distribution(ibs: IbsState) -> GridDistribution:
    """Histogram of recorded virtual goals; all zeros before anything is stored."""
    if ibs.total_stored == 0:
        return GridDistribution(np.zeros(ibs.grid.shape), ibs.grid)
    return GridDistribution(ibs.proposal_counts / ibs.total_stored, ibs.grid)


def ibs_weights(candidates, ibs: IbsState) -> np.ndarray:
    i, j = ibs.grid.bin(candidates)
    q_star = ibs.target_q_star.values[i, j]
    q = ibs.proposal_counts[i, j] / ibs.total_stored if ibs.total_stored else 0.0
    return np.maximum(q_star - q, ibs.weight_floor)


def ibs_priorities(candidates, ibs: IbsState) -> np.ndarray:
    if len(candidates) == 0:
        raise PreconditionError("no candidate goals to prioritize")
    w = ibs_weights(candidates, ibs)
    return w / w.sum()


def sample_virtual_goals(candidates, priorities, k: int, rng) -> np.ndarray:
    """``k`` draws with replacement from ``candidates`` by inverse-CDF lookup."""
    candidates = np.asarray(candidates)
    cdf = np.cumsum(np.asarray(priorities, dtype=np.float64))
    idx = np.searchsorted(cdf, rng.random(k) * cdf[-1], side="right")
    return candidates[np.minimum(idx, len(candidates) - 1)]


def filter_virtual_transition(traj: EpisodeTrajectory, t: int, vg, reward_fn) -> str:
    """``SKIP`` when ``vg`` is already achieved in the state action ``t`` was taken from.

    For ``t >= 1`` this is the reward of the previous transition under
    ``vg``; for ``t = 0`` it is the initial achieved goal. Both reduce to
    checking ``achieved_goals[t]``.
    """
    if not 0 <= t < traj.horizon:
        raise PreconditionError(f"t={t} outside [0, {traj.horizon})")
    r = reward_fn(traj.achieved_goals[t], np.asarray(vg))
    return SKIP if float(np.asarray(r).ravel()[0]) == 0.0 else KEEP


def record_stored_goal(ibs: IbsState, vg) -> IbsState:
    return record_stored_goals(ibs, np.atleast_2d(vg))


def record_stored_goals(ibs: IbsState, goals) -> IbsState:
    goals = np.asarray(goals)
    if goals.size:
        flat = ibs.grid.flat_bin(goals)
        ibs.proposal_counts += np.bincount(flat, minlength=ibs.proposal_counts.size).reshape(
            ibs.proposal_counts.shape)
        ibs.total_stored += len(flat)
    return ibs


def annealed_sigma_sq(completed_cycles: int, init=2.0, final=0.2, decay=0.9, period=50) -> float:
    if completed_cycles < 0:
        raise PreconditionError("completed_cycles must be non-negative")
    return max(final, init * decay ** (completed_cycles // period))


def anneal_sigma(ibs: IbsState, completed_cycles: int) -> IbsState:
    """Set the kernel variance for ``completed_cycles``; rebuild ``q*`` when it moves."""
    new = annealed_sigma_sq(completed_cycles, ibs.sigma_sq_init, ibs.sigma_sq_final,
                            ibs.sigma_decay, ibs.anneal_period_cycles)
    if new != ibs.sigma_sq:
        ibs.sigma_sq = new
        ibs.target_q_star = build_target_grid(ibs.goal_distribution, np.sqrt(new), ibs.grid,
                                              ibs.target_floor)
        ibs.history.append((completed_cycles, new))
    return ibs


def relabel_episode(traj: EpisodeTrajectory, reward_fn, cfg: HerConfig, rng,
                    ibs: IbsState | None = None):
    """Build the rows one episode contributes to the replay buffer.

    Row order follows the storage loop: the real transition for step ``t``
    followed by its surviving virtual transitions. Virtual-goal priorities
    are computed once per episode from the proposal grid as it stood before
    the episode; the proposal grid is then updated with every stored goal.

    Returns ``(rows, n_skipped)`` where ``rows`` maps buffer field names to
    arrays.
    """
    T = traj.horizon
    ag = np.asarray(traj.achieved_goals, dtype=np.float64)
    obs = np.asarray(traj.observations, dtype=np.float64)
    acts = np.asarray(traj.actions, dtype=np.float64)
    g = np.asarray(traj.desired_goal, dtype=np.float64)
    k = cfg.k_virtual

    if cfg.variant_ibs:
        if ibs is None:
            raise ConfigurationError("IBS selection needs an IbsState")
        w = ibs_weights(ag[1:], ibs)
    else:
        w = np.ones(T)
    # future candidates of step t are ag[t+1:], i.e. w[t:]; sample by inverse CDF
    cdf = np.cumsum(w)
    start = np.concatenate([[0.0], cdf[:-1]])
    u = rng.random((T, k))
    target = start[:, None] + u * (cdf[-1] - start)[:, None]
    pick = np.minimum(np.searchsorted(cdf, target, side="right"), T - 1)
    vg = ag[pick + 1]                                   # (T, k, goal_dim)

    t_idx = np.repeat(np.arange(T), k)
    vg_flat = vg.reshape(T * k, -1)
    keep = np.ones(T * k, dtype=bool)
    if cfg.variant_filter and k:
        keep = reward_fn(ag[t_idx], vg_flat) != 0.0
    n_skipped = int((~keep).sum())

    real_reward = reward_fn(ag[1:], np.broadcast_to(g, (T, g.shape[0])))
    virt_reward = reward_fn(ag[t_idx + 1], vg_flat) if k else np.zeros(0)

    # interleave: real row t, then the kept virtual rows of t
    kept_t = t_idx[keep]
    order_t = np.concatenate([np.arange(T), kept_t])
    order_kind = np.concatenate([np.zeros(T), np.ones(len(kept_t))])
    order = np.lexsort((order_kind, order_t))
    src_t = order_t[order]
    is_virtual = order_kind[order].astype(bool)
    goals = np.concatenate([np.broadcast_to(g, (T, g.shape[0])), vg_flat[keep]])[order]
    rewards = np.concatenate([real_reward, virt_reward[keep]])[order]

    rows = {
        "observation": obs[src_t],
        "goal": goals,
        "action": acts[src_t],
        "reward": rewards,
        "next_observation": obs[src_t + 1],
        "achieved_goal": ag[src_t],
        "next_achieved_goal": ag[src_t + 1],
        "is_virtual": is_virtual,
    }
    if ibs is not None:
        record_stored_goals(ibs, vg_flat[keep])
    return rows, n_skipped


def count_misleading(achieved_goal, goal, is_virtual, reward_fn) -> int:
    """Virtual rows whose goal was already achieved before their action."""
    mask = np.asarray(is_virtual, dtype=bool)
    if not mask.any():
        return 0
    r = reward_fn(np.asarray(achieved_goal)[mask], np.asarray(goal)[mask])
    return int(np.sum(r == 0.0))
