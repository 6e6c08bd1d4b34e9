import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hindsight.envs import BitFlipEnv, HandEnv, HandWallEnv, RobotEnv, make_env
from hindsight.envs.base import rollout, write_trace
from hindsight.exceptions import ConfigurationError, ShapeError
from hindsight.envs.throw import ThrowState


def random_policy(env, seed):
    rng = np.random.default_rng(seed)
    return lambda X: rng.uniform(env.action_low, env.action_high, size=(len(X), env.action_dim))


class TestBitFlip:
    def test_flip(self):
        env = BitFlipEnv(n_bits=3)
        state, _ = env.reset(0)
        state = type(state)((0, 1, 0))
        nxt, _, done = env.step(state, 0, np.zeros(3))
        assert nxt.bits == (1, 1, 0) and not done

    def test_null_action(self):
        env = BitFlipEnv(n_bits=3)
        state = type(env.reset(0)[0])((0, 1, 0))
        nxt, r, done = env.step(state, 3, np.array([0.0, 1.0, 0.0]))
        assert nxt.bits == (0, 1, 0) and done and r == 0.0

    def test_argmax_decoding(self):
        env = BitFlipEnv(n_bits=3)
        assert env.decode([0.1, 0.9, -1.0, 0.2]) == 1
        with pytest.raises(ShapeError):
            env.decode([0.0, 1.0])

    def test_horizon(self):
        env = BitFlipEnv(n_bits=4)
        ep = rollout(env, lambda X: np.tile([1.0, 0, 0, 0, -1], (len(X), 1)), [env.reset(1)])[0]
        assert ep.length == 6

    def test_reward(self):
        env = BitFlipEnv(n_bits=3)
        assert env.reward([1, 0, 1], [1, 0, 1]) == 0.0
        assert env.reward([1, 0, 1], [1, 1, 1]) == -1.0
        with pytest.raises(ShapeError):
            env.reward([1, 0], [1, 0, 1])

    def test_bad_size(self):
        with pytest.raises(ConfigurationError):
            BitFlipEnv(n_bits=0)


class TestHandReset:
    def test_ball_in_hand_frequency(self):
        env = HandEnv()
        held = [env.reset(s)[0].held for s in range(10_000)]
        assert abs(np.mean(held) - 0.5) < 0.02

    def test_goal_in_region(self):
        env = HandEnv()
        for s in range(500):
            _, g = env.reset(s)
            assert env.goal_distribution.contains(g)

    def test_deterministic(self):
        env = HandEnv()
        a, ga = env.reset(7)
        b, gb = env.reset(7)
        assert a == b and np.array_equal(ga, gb)

    def test_robot_reset_in_workspace(self):
        env = RobotEnv()
        for s in range(200):
            state, _ = env.reset(s)
            np.testing.assert_allclose(env.forward_kinematics(state.theta), state.hand_pos,
                                       atol=1e-12)


class TestHandDynamics:
    def held_state(self):
        return ThrowState((0.2, 0.5), (0.0, 0.0), False, (0.2, 0.5), (0.0, 0.0), True)

    def test_held_ball_tracks_hand(self):
        env = HandEnv()
        state = self.held_state()
        for a in [(1, 0, -1), (0.3, -0.5, -1), (-1, 1, -1)]:
            state, _, _ = env.step(state, np.array(a, float), np.array([0.8, 0.5]))
            assert state.held
            np.testing.assert_array_equal(env.achieved_goal(state), state.hand_pos)

    def test_ballistic_flight(self):
        env = HandEnv()
        g = env.config.gravity
        state, _, _ = env.step(self.held_state(), np.array([1.0, 1.0, 1.0]), np.zeros(2) + 0.9)
        assert not state.held
        p0 = np.array(state.ball_pos)
        v0 = np.array(state.ball_vel)
        for t in range(1, 8):
            state, _, _ = env.step(state, np.array([0.0, 0.0, 1.0]), np.zeros(2) + 0.9)
            # explicit Euler: x_t = x0 + v t, y_t = y0 + vy t - g t(t-1)/2
            expected = p0 + v0 * t - np.array([0.0, g * t * (t - 1) / 2])
            np.testing.assert_allclose(state.ball_pos, expected, atol=1e-12)
            assert state.ball_vel[0] == pytest.approx(v0[0])
            assert state.ball_vel[1] == pytest.approx(v0[1] - g * t)

    def test_floor_rests_ball(self):
        env = HandEnv()
        state, _, _ = env.step(self.held_state(), np.array([1.0, 0.0, 1.0]), np.zeros(2))
        for _ in range(60):
            state, _, _ = env.step(state, np.array([0.0, 0.0, 1.0]), np.zeros(2))
        assert state.ball_pos[1] == env.config.floor_y and state.ball_vel == (0.0, 0.0)

    def test_grasp_requires_radius(self):
        env = HandEnv()
        far = ThrowState((0.1, 0.05), (0, 0), True, (0.3, 0.05), (0, 0), False)
        near = ThrowState((0.28, 0.05), (0, 0), True, (0.3, 0.05), (0, 0), False)
        close = np.array([0.0, 0.0, -1.0])
        assert not env.step(far, close, np.zeros(2))[0].held
        assert env.step(near, close, np.zeros(2))[0].held

    def test_reward_strict(self):
        env = HandEnv()
        assert env.reward([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert env.reward([0.5, 0.5], [0.5, 0.55]) == -1.0
        assert env.reward([0.5, 0.5], [0.5, 0.5499]) == 0.0

    def test_pure_transition(self):
        env = HandEnv()
        state, goal = env.reset(3)
        a = np.array([0.4, -0.2, 1.0])
        assert env.step(state, a, goal) == env.step(state, a, goal)

    def test_actions_clamped(self):
        env = HandEnv()
        s = self.held_state()
        assert env.step(s, np.array([5.0, 0, -1]), np.zeros(2)) == \
            env.step(s, np.array([1.0, 0, -1]), np.zeros(2))


def _crosses_wall(p, q, wall_x, bottom, top):
    if (p[0] - wall_x) * (q[0] - wall_x) >= 0 or p[0] == q[0]:
        return False
    y = p[1] + (wall_x - p[0]) / (q[0] - p[0]) * (q[1] - p[1])
    return bottom <= y <= top


class TestHandWall:
    def test_wall_soundness(self):
        env = HandWallEnv()
        (wx, bottom), (_, top) = env.wall
        starts = [env.reset(s) for s in range(100)]
        for ep in rollout(env, random_policy(env, 0), starts):
            ag = ep.achieved_goals
            for p, q in zip(ag[:-1], ag[1:]):
                assert not _crosses_wall(p, q, wx, bottom, top)

    def test_direct_throw_stopped(self):
        env = HandWallEnv()
        state = ThrowState((0.3, 0.2), (0, 0), False, (0.3, 0.2), (0, 0), True)
        state, _, _ = env.step(state, np.array([1.0, 0.0, 1.0]), np.zeros(2))
        for _ in range(20):
            state, _, _ = env.step(state, np.array([0.0, 0.0, 1.0]), np.zeros(2))
        assert state.ball_pos[0] < env.config.wall_x

    def test_high_throw_clears(self):
        env = HandWallEnv()
        state = ThrowState((0.3, 0.9), (0, 0), False, (0.3, 0.9), (0, 0), True)
        state, _, _ = env.step(state, np.array([1.0, 1.0, 1.0]), np.zeros(2))
        for _ in range(30):
            state, _, _ = env.step(state, np.array([0.0, 0.0, 1.0]), np.zeros(2))
        assert state.ball_pos[0] > env.config.wall_x


class TestRobot:
    def test_kinematic_consistency(self):
        env = RobotEnv()
        starts = [env.reset(s) for s in range(20)]
        for ep in rollout(env, random_policy(env, 1), starts):
            for s in ep.states:
                np.testing.assert_allclose(env.forward_kinematics(s.theta), s.hand_pos, atol=1e-9)
                if s.held:
                    assert s.ball_pos == s.hand_pos

    def test_forward_kinematics_closed_form(self):
        env = RobotEnv()
        x, y = env.forward_kinematics((0.0, math.pi / 2))
        assert (x, y) == pytest.approx((0.45, 0.55))


class TestCommon:
    @pytest.mark.parametrize("name", ["hand", "hand-wall", "robot", "bitflip"])
    def test_dimensions(self, name):
        env = make_env(name)
        state, goal = env.reset(0)
        assert env.observe(state).shape == (env.observation_dim,)
        assert env.achieved_goal(state).shape == (env.goal_dim,) == goal.shape

    def test_unknown_env(self):
        with pytest.raises(ConfigurationError):
            make_env("cartpole")

    def test_unknown_param(self):
        with pytest.raises((ConfigurationError, TypeError)):
            make_env("hand", drag=0.1)

    @pytest.mark.parametrize("name", ["hand", "robot"])
    def test_held_coupling_in_rollouts(self, name):
        env = make_env(name)
        for ep in rollout(env, random_policy(env, 2), [env.reset(s) for s in range(30)]):
            for s, ag in zip(ep.states, ep.achieved_goals):
                if s.held:
                    np.testing.assert_array_equal(ag, s.hand_pos)

    def test_random_policy_fails_hand_wall(self):
        env = HandWallEnv()
        eps = rollout(env, random_policy(env, 3), [env.reset(s) for s in range(200)])
        assert np.mean([e.success for e in eps]) < 0.05

    def test_trace_csv(self, tmp_path):
        env = HandEnv()
        ep = rollout(env, random_policy(env, 4), [env.reset(0)])[0]
        write_trace(tmp_path / "t.csv", env, ep)
        with open(tmp_path / "t.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == ep.length + 1
        assert float(rows[3]["reward"]) == ep.rewards[3]
        assert float(rows[-1]["achieved_goal_0"]) == ep.achieved_goals[-1, 0]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)),
                    min_size=1, max_size=50),
           st.integers(0, 1000))
    def test_hand_invariants(self, actions, seed):
        env = HandEnv()
        state, goal = env.reset(seed)
        c = env.config
        for a in actions:
            state, r, _ = env.step(state, np.array(a), goal)
            assert c.hand_low[0] <= state.hand_pos[0] <= c.hand_high[0]
            assert c.hand_low[1] <= state.hand_pos[1] <= c.hand_high[1]
            assert c.floor_y <= state.ball_pos[1] <= 1.0
            assert r == env.reward(env.achieved_goal(state), goal)
