import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hindsight import AgentConfig, make_env
from hindsight.agent import build_actor_critic
from hindsight.envs.base import GoalEnv
from hindsight.exceptions import PreconditionError
from hindsight.goals import UniformRect, build_target_grid, unit_grid
from hindsight.metrics import (CURVE_COLUMNS, aggregate_curves, discounted_return,
                               evaluate_policy, evaluate_with_bias, q_bias_probe,
                               read_learning_curves, vg_distribution_report, write_aggregate,
                               write_learning_curves)


class TeleportEnv(GoalEnv):
    """The action is the next ball position."""

    name = "teleport"
    observation_dim = goal_dim = action_dim = 2
    action_low = np.zeros(2)
    action_high = np.ones(2)
    binary_actions = np.zeros(2, dtype=bool)
    horizon = 5

    def __init__(self, success_epsilon=0.05):
        self.success_epsilon = success_epsilon

    def reset(self, seed=None):
        rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
        return (tuple(rng.random(2)), 0), rng.random(2)

    def step(self, state, action, goal):
        nxt = (tuple(np.clip(action, 0, 1)), state[1] + 1)
        return nxt, self.reward(np.array(nxt[0]), goal), nxt[1] >= self.horizon

    def observe(self, state):
        return np.array(state[0])

    def achieved_goal(self, state):
        return np.array(state[0])


def oracle(X):
    return X[:, 2:]


class TestEvaluatePolicy:
    def test_oracle_succeeds(self):
        report = evaluate_policy(TeleportEnv(), oracle, 20, 0)
        assert report.success_rate == 1.0 and report.final_success_rate == 1.0
        assert report.mean_final_distance == 0.0

    def test_stuck_policy(self):
        report = evaluate_policy(TeleportEnv(), lambda X: X[:, :2], 50, 1)
        assert report.success_rate < 0.1

    def test_random_on_hand_wall(self):
        env = make_env("hand-wall")
        rng = np.random.default_rng(0)
        report = evaluate_policy(env, lambda X: rng.uniform(-1, 1, (len(X), 3)), 200, 0)
        assert report.success_rate < 0.05

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 30), st.integers(0, 100))
    def test_success_is_count(self, n, seed):
        report = evaluate_policy(TeleportEnv(success_epsilon=0.3), lambda X: X[:, :2], n, seed)
        assert report.success_rate * n == pytest.approx(round(report.success_rate * n))
        assert report.n_episodes == n

    def test_deterministic(self):
        env = make_env("hand")
        ac = build_actor_critic(env, AgentConfig(), 0)
        assert evaluate_policy(env, ac, 10, 3) == evaluate_policy(env, ac, 10, 3)

    def test_needs_episodes(self):
        with pytest.raises(PreconditionError):
            evaluate_policy(TeleportEnv(), oracle, 0, 0)


class TestBiasProbe:
    def test_zero_everywhere(self):
        env = TeleportEnv(success_epsilon=10.0)
        ac = build_actor_critic(env, AgentConfig(), 0)
        ac.critic.weights[-1][:] = 0.0
        ac.critic.biases[-1][:] = 0.0
        q0, ret = q_bias_probe(env, ac, 10, 0.98, 0)
        assert q0 == 0.0 and ret == 0.0

    def test_constant_critic_bias(self):
        env = TeleportEnv(success_epsilon=0.0)
        ac = build_actor_critic(env, AgentConfig(), 0)
        ac.critic.weights[-1][:] = 0.0
        ac.critic.biases[-1][:] = -3.0
        report, episodes = evaluate_with_bias(env, ac, 8, 0.98, 0)
        assert report.q0_estimate == pytest.approx(-3.0)
        assert report.empirical_return == pytest.approx(-50.0)
        assert report.bias == pytest.approx(47.0)
        assert len(episodes) == 8


class TestDiscountedReturn:
    @given(st.integers(1, 60), st.floats(0.0, 0.99))
    def test_constant_rewards(self, T, gamma):
        assert discounted_return([-1.0] * T, gamma, tail=False) == pytest.approx(
            -(1 - gamma ** T) / (1 - gamma))
        assert discounted_return([-1.0] * T, gamma) == pytest.approx(-1 / (1 - gamma))

    def test_reaching_goal(self):
        r = [-1.0, -1.0, 0.0, 0.0]
        assert discounted_return(r, 0.5) == pytest.approx(-1.5)
        assert discounted_return([], 0.9) == 0.0


class TestVirtualGoalReport:
    def dump(self, goals, virtual):
        return {"goal": np.asarray(goals, float), "is_virtual": np.asarray(virtual, bool)}

    def test_single_cell(self):
        grid = unit_grid()
        target = build_target_grid(UniformRect((0.55, 0.05), (0.95, 0.95)), 0.2, grid, 0.002)
        dump = self.dump([[0.71, 0.33]] * 5 + [[0.1, 0.1]], [True] * 5 + [False])
        proposal, kl = vg_distribution_report(dump, grid, target)
        assert proposal.values[14, 6] == 1.0 and proposal.values.sum() == 1.0
        p = target.values.ravel()
        q = np.maximum(proposal.values.ravel(), 1e-12)
        assert kl == pytest.approx(float(np.sum(p * np.log(p / q))))

    def test_direction(self):
        grid = unit_grid()
        target = build_target_grid(UniformRect((0.55, 0.05), (0.95, 0.95)), 0.2, grid, 0.002)
        rng = np.random.default_rng(0)
        dump = self.dump(rng.random((4000, 2)), np.ones(4000, bool))
        proposal, forward = vg_distribution_report(dump, grid, target)
        _, backward = vg_distribution_report(dump, grid, target, "proposal-target")
        q = proposal.values.ravel()
        p = target.values.ravel()
        nz = q > 0
        assert backward == pytest.approx(float(np.sum(q[nz] * np.log(q[nz] / p[nz]))))
        assert forward != pytest.approx(backward)

    def test_no_virtual(self):
        grid = unit_grid()
        target = build_target_grid(UniformRect((0.55, 0.05), (0.95, 0.95)), 0.2, grid, 0.002)
        with pytest.raises(PreconditionError):
            vg_distribution_report(self.dump([[0.5, 0.5]], [False]), grid, target)


def curve(epoch, success, kl=math.nan):
    row = {c: 0.0 for c in CURVE_COLUMNS}
    row.update(epoch=epoch, success_rate=success, kl_to_target=kl)
    return row


class TestCurves:
    def test_round_trip(self, tmp_path):
        rows = [curve(0, 0.1, 2.5), curve(1, 0.3)]
        path = write_learning_curves(rows, tmp_path / "c.csv")
        back = read_learning_curves(path)
        assert back[0]["success_rate"] == 0.1 and back[1]["epoch"] == 1
        assert math.isnan(back[1]["kl_to_target"])
        assert open(path).readline().strip().split(",") == list(CURVE_COLUMNS)

    def test_aggregate_percentiles(self, tmp_path):
        rates = [0.0, 0.2, 0.4, 0.9]
        runs = [[curve(0, r), curve(1, r / 2)] for r in rates] + [[curve(0, 1.0)]]
        out = aggregate_curves(runs)
        assert [row["epoch"] for row in out] == [0]
        expected = np.percentile(rates + [1.0], [33, 50, 67])
        assert [out[0][f"success_rate_p{p}"] for p in (33, 50, 67)] == pytest.approx(expected)
        assert math.isnan(out[0]["kl_to_target_p50"])
        write_aggregate(out, tmp_path / "agg.csv")
        assert len(open(tmp_path / "agg.csv").readlines()) == 2

    def test_aggregate_from_paths(self, tmp_path):
        paths = [write_learning_curves([curve(0, r)], tmp_path / f"{i}.csv")
                 for i, r in enumerate([0.1, 0.3, 0.5])]
        assert aggregate_curves(paths)[0]["success_rate_p50"] == pytest.approx(0.3)
        assert aggregate_curves([]) == []
