"""Evaluation: success rate, distance to goal, critic bias, virtual-goal KL,
and learning-curve CSVs.

KL direction: ``KL(target || proposal)``; the target grid is the fixed
reference and the proposal histogram is floored at 1e-12 inside the log.
Percentile bands use numpy's linear interpolation between order
statistics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .envs.base import GoalEnv, as_rng, rollout
from .exceptions import PreconditionError
from .goals import GridDistribution, GridSpec, histogram, kl_divergence
from .replay import read_buffer_dump

CURVE_COLUMNS = (
    "epoch", "success_rate", "mean_final_distance", "q0_estimate", "empirical_return",
    "epsilon", "kl_to_target", "sigma_sq", "final_success_rate",
)
AGGREGATE_METRICS = CURVE_COLUMNS[1:]
PERCENTILES = (33, 50, 67)


@dataclass
class EvalReport:
    success_rate: float
    mean_final_distance: float
    q0_estimate: float
    empirical_return: float
    kl_to_target: float
    n_episodes: int
    final_success_rate: float

    @property
    def bias(self) -> float:
        return self.q0_estimate - self.empirical_return

    def as_dict(self) -> dict:
        return asdict(self)


def _greedy(policy):
    return policy.greedy if hasattr(policy, "greedy") else policy


def _starts(env: GoalEnv, n_episodes: int, seed):
    rng = as_rng(seed)
    return [env.reset(rng) for _ in range(n_episodes)]


def discounted_return(rewards, gamma: float, tail: bool = True) -> float:
    """Discounted sum of ``rewards``.

    With ``tail`` the last reward repeats forever after the episode ends,
    matching a critic that bootstraps through timeouts and terminations.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        return 0.0
    discounts = gamma ** np.arange(r.size)
    total = float(np.dot(discounts, r))
    if tail and gamma < 1.0:
        total += gamma ** r.size * r[-1] / (1.0 - gamma)
    return total


def _rollout_stats(env, episodes):
    success = np.array([ep.success for ep in episodes], dtype=np.float64)
    final = np.array([ep.rewards[-1] == 0.0 for ep in episodes], dtype=np.float64)
    dist = np.array([float(env.distance(ep.achieved_goals[-1], ep.goal)) for ep in episodes])
    return success, final, dist


def evaluate_policy(env: GoalEnv, policy, n_episodes: int, seed) -> EvalReport:
    """Greedy rollouts from seeded starts.

    An episode succeeds if any of its steps earns reward 0; the final
    distance is measured between the last achieved goal and the goal.
    """
    if n_episodes < 1:
        raise PreconditionError("n_episodes must be at least 1")
    episodes = rollout(env, _greedy(policy), _starts(env, n_episodes, seed))
    success, final, dist = _rollout_stats(env, episodes)
    return EvalReport(
        success_rate=float(success.sum()) / n_episodes,
        mean_final_distance=float(dist.mean()),
        q0_estimate=math.nan,
        empirical_return=math.nan,
        kl_to_target=math.nan,
        n_episodes=n_episodes,
        final_success_rate=float(final.sum()) / n_episodes,
    )


def q_bias_probe(env: GoalEnv, ac, n_episodes: int, gamma: float, seed, tail: bool = True):
    """Median critic value of the first greedy action and median realized return.

    Both medians come from the same ``(s0, g)`` pairs: the critic is queried
    at ``(s0 || g, pi(s0 || g))`` and the greedy rollout from that start
    provides the return.
    """
    report, _ = evaluate_with_bias(env, ac, n_episodes, gamma, seed, tail)
    return report.q0_estimate, report.empirical_return


def evaluate_with_bias(env: GoalEnv, ac, n_episodes: int, gamma: float, seed, tail: bool = True):
    """One pass producing success, distance and bias fields; also returns the episodes."""
    if n_episodes < 1:
        raise PreconditionError("n_episodes must be at least 1")
    starts = _starts(env, n_episodes, seed)
    x0 = np.array([np.concatenate([env.observe(s), g]) for s, g in starts])
    q0 = np.asarray(ac.q_values(x0, ac.greedy(x0)), dtype=np.float64).ravel()
    episodes = rollout(env, ac.greedy, starts)
    success, final, dist = _rollout_stats(env, episodes)
    returns = np.array([discounted_return(ep.rewards, gamma, tail) for ep in episodes])
    report = EvalReport(
        success_rate=float(success.sum()) / n_episodes,
        mean_final_distance=float(dist.mean()),
        q0_estimate=float(np.median(q0)),
        empirical_return=float(np.median(returns)),
        kl_to_target=math.nan,
        n_episodes=n_episodes,
        final_success_rate=float(final.sum()) / n_episodes,
    )
    return report, episodes


def virtual_goal_proposal(goals, grid: GridSpec) -> GridDistribution:
    counts = histogram(goals, grid)
    total = counts.sum()
    if total == 0:
        raise PreconditionError("no virtual transitions to build a proposal from")
    return GridDistribution(counts / total, grid)


def vg_distribution_report(buffer_dump, grid: GridSpec, target: GridDistribution,
                           direction: str = "target-proposal"):
    """Proposal grid of stored virtual goals and its KL divergence to ``target``.

    ``buffer_dump`` is a dump path or the dict returned by
    :func:`read_buffer_dump`. ``direction`` selects ``KL(target || proposal)``
    (default) or ``KL(proposal || target)``.
    """
    dump = read_buffer_dump(buffer_dump) if isinstance(buffer_dump, (str, Path)) else buffer_dump
    goals = np.asarray(dump["goal"])[np.asarray(dump["is_virtual"], dtype=bool)]
    if len(goals) == 0:
        raise PreconditionError("buffer dump holds no virtual transitions")
    proposal = virtual_goal_proposal(goals, grid)
    if direction == "target-proposal":
        kl = kl_divergence(target, proposal)
    elif direction == "proposal-target":
        kl = kl_divergence(proposal, target)
    else:
        raise ValueError(f"unknown KL direction {direction!r}")
    return proposal, kl


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_learning_curves(rows, path) -> Path:
    """One row per epoch in :data:`CURVE_COLUMNS` order."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in CURVE_COLUMNS])
    return path


def read_learning_curves(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: (int(v) if k == "epoch" else float(v)) for k, v in r.items()} for r in reader]


def aggregate_curves(runs, metrics=AGGREGATE_METRICS) -> list[dict]:
    """Per-epoch 33rd/50th/67th percentiles across runs (NaNs ignored).

    ``runs`` is a list of curve-row lists or paths; epochs present in every
    run are aggregated.
    """
    runs = [read_learning_curves(r) if isinstance(r, (str, Path)) else r for r in runs]
    if not runs:
        return []
    epochs = sorted(set.intersection(*(set(row["epoch"] for row in r) for r in runs)))
    by_epoch = [{row["epoch"]: row for row in r} for r in runs]
    out = []
    for e in epochs:
        row = {"epoch": e}
        for m in metrics:
            vals = np.array([r[e][m] for r in by_epoch], dtype=np.float64)
            finite = vals[~np.isnan(vals)]
            for p in PERCENTILES:
                row[f"{m}_p{p}"] = float(np.percentile(finite, p)) if finite.size else math.nan
        out.append(row)
    return out


def write_aggregate(rows, path, metrics=AGGREGATE_METRICS) -> Path:
    cols = ["epoch"] + [f"{m}_p{p}" for m in metrics for p in PERCENTILES]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])
    return Path(path)
