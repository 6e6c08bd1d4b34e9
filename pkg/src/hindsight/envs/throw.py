"""Ball-throwing tasks on the unit screen: a free-moving hand, the same hand
behind a wall, and a two-link arm driven by joint velocities.

Time is measured in steps (``dt = 1``). A free ball moves with explicit
Euler integration: position advances by the current velocity, then gravity
is subtracted from the vertical velocity. Touching the floor stops the ball
where it lands. A held ball moves with the effector. Success means the ball
is strictly closer than ``success_epsilon`` to the goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..goals import UniformRect
from .base import GoalEnv, as_rng


@dataclass(frozen=True)
class ThrowConfig:
    gravity: float = 0.003
    max_speed: float = 0.05
    grasp_radius: float = 0.05
    success_epsilon: float = 0.05
    horizon: int = 50
    floor_y: float = 0.05
    screen_low: tuple = (0.0, 0.0)
    screen_high: tuple = (1.0, 1.0)
    hand_low: tuple = (0.05, 0.05)
    hand_high: tuple = (0.35, 0.95)
    target_low: tuple = (0.55, 0.05)
    target_high: tuple = (0.95, 0.95)
    ball_in_hand_prob: float = 0.5
    wall_x: float | None = None
    wall_height: float = 0.5


@dataclass(frozen=True)
class ThrowState:
    hand_pos: tuple
    hand_vel: tuple
    gripper_open: bool
    ball_pos: tuple
    ball_vel: tuple
    held: bool
    steps: int = 0


@dataclass(frozen=True)
class RobotConfig(ThrowConfig):
    link_lengths: tuple = (0.25, 0.25)
    base: tuple = (0.2, 0.3)
    max_joint_speed: float = 0.15
    hand_low: tuple = (0.0, 0.05)
    hand_high: tuple = (0.45, 1.0)


@dataclass(frozen=True)
class RobotState:
    theta: tuple
    theta_dot: tuple
    hand_pos: tuple
    hand_vel: tuple
    gripper_open: bool
    ball_pos: tuple
    ball_vel: tuple
    held: bool
    steps: int = 0


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


class _ThrowingEnv(GoalEnv):
    def __init__(self, config):
        self.config = c = config
        self.goal_dim = 2
        self.action_dim = 3
        self.action_low = -np.ones(3)
        self.action_high = np.ones(3)
        self.binary_actions = np.array([False, False, True])
        self.success_epsilon = c.success_epsilon
        self.horizon = c.horizon
        self.goal_distribution = UniformRect(c.target_low, c.target_high)
        self.goal_bounds = UniformRect(c.screen_low, c.screen_high)

    def _sample_goal(self, rng):
        c = self.config
        return rng.uniform(c.target_low, c.target_high)

    def _fly(self, pos, vel):
        """One free-flight step with wall, screen and floor contacts."""
        c = self.config
        x0, y0 = pos
        vx, vy = vel
        x, y = x0 + vx, y0 + vy
        vy -= c.gravity
        if c.wall_x is not None and (x0 - c.wall_x) * (x - c.wall_x) <= 0 and x != x0:
            y_cross = y0 + (c.wall_x - x0) / (x - x0) * (y - y0)
            if y_cross <= c.wall_height:
                # inelastic hit: the ball stops on the face it came from and drops
                side = -1.0 if x0 < c.wall_x else 1.0
                x = c.wall_x + side * 1e-9
                y = max(y_cross, c.floor_y)
                vx, vy = 0.0, 0.0
        if x < c.screen_low[0] or x > c.screen_high[0]:
            x = _clamp(x, c.screen_low[0], c.screen_high[0])
            vx = 0.0
        if y > c.screen_high[1]:
            y, vy = c.screen_high[1], 0.0
        if y <= c.floor_y:
            y, vx, vy = c.floor_y, 0.0, 0.0
        return (x, y), (vx, vy)

    def _ball_update(self, state, hand_pos, hand_vel, open_cmd):
        """Ball position, velocity and held flag after the effector moved."""
        closing = state.gripper_open and not open_cmd
        opening = (not state.gripper_open) and open_cmd
        if state.held:
            # released balls leave with the hand's velocity and fly from the next step
            return hand_pos, hand_vel, not opening
        ball_pos, ball_vel = self._fly(state.ball_pos, state.ball_vel)
        if closing and math.dist(hand_pos, ball_pos) <= self.config.grasp_radius:
            return hand_pos, hand_vel, True
        return ball_pos, ball_vel, False

    def achieved_goal(self, state) -> np.ndarray:
        return np.array(state.ball_pos, dtype=np.float64)

    def _ball_features(self, state):
        s = self.config.max_speed
        return [
            0.0 if state.gripper_open else 1.0,
            state.ball_pos[0], state.ball_pos[1],
            state.ball_vel[0] / s, state.ball_vel[1] / s,
        ]


class HandEnv(_ThrowingEnv):
    """Pick up the ball with a velocity-controlled hand and throw it at the goal.

    Observation: hand x, y, hand velocity (in units of ``max_speed``),
    gripper closed flag, ball x, y, ball velocity (same units). Action:
    hand velocity command in ``[-1, 1]^2`` scaled by ``max_speed`` and a
    gripper coordinate (open iff > 0).
    """

    name = "hand"

    def __init__(self, config: ThrowConfig | None = None, **overrides):
        super().__init__(config or ThrowConfig(**overrides))
        self.observation_dim = 9

    def reset(self, seed=None):
        rng = as_rng(seed)
        c = self.config
        hand = tuple(float(v) for v in rng.uniform(c.hand_low, c.hand_high))
        in_hand = rng.random() < c.ball_in_hand_prob
        if in_hand:
            ball = hand
        else:
            ball = (float(rng.uniform(c.hand_low[0], c.hand_high[0])), c.floor_y)
        goal = self._sample_goal(rng)
        state = ThrowState(hand, (0.0, 0.0), not in_hand, ball, (0.0, 0.0), in_hand, 0)
        return state, goal

    def step(self, state: ThrowState, action, goal):
        c = self.config
        a0 = _clamp(float(action[0]), -1.0, 1.0)
        a1 = _clamp(float(action[1]), -1.0, 1.0)
        open_cmd = float(action[2]) > 0.0
        hx = _clamp(state.hand_pos[0] + a0 * c.max_speed, c.hand_low[0], c.hand_high[0])
        hy = _clamp(state.hand_pos[1] + a1 * c.max_speed, c.hand_low[1], c.hand_high[1])
        hand_vel = (hx - state.hand_pos[0], hy - state.hand_pos[1])
        ball_pos, ball_vel, held = self._ball_update(state, (hx, hy), hand_vel, open_cmd)
        nxt = ThrowState((hx, hy), hand_vel, open_cmd, ball_pos, ball_vel, held, state.steps + 1)
        reward = self.reward(np.array(ball_pos), goal)
        return nxt, reward, nxt.steps >= self.horizon

    def observe(self, state: ThrowState) -> np.ndarray:
        s = self.config.max_speed
        return np.array([
            state.hand_pos[0], state.hand_pos[1],
            state.hand_vel[0] / s, state.hand_vel[1] / s,
            *self._ball_features(state),
        ])


class HandWallEnv(HandEnv):
    """Hand task with a wall between the hand workspace and the targets."""

    name = "hand-wall"

    def __init__(self, config: ThrowConfig | None = None, **overrides):
        overrides.setdefault("wall_x", 0.45)
        super().__init__(config or ThrowConfig(**overrides))

    @property
    def wall(self):
        """Wall segment as ``((x, y_bottom), (x, y_top))``."""
        c = self.config
        return (c.wall_x, c.floor_y), (c.wall_x, c.wall_height)


class RobotEnv(_ThrowingEnv):
    """Two-link arm; actions are joint velocities plus the gripper coordinate.

    Joint angles are absolute for the first link and relative for the
    second. A step that would move the end-effector out of its workspace is
    cancelled (the arm stays put with zero joint velocity).
    """

    name = "robot"

    def __init__(self, config: RobotConfig | None = None, **overrides):
        super().__init__(config or RobotConfig(**overrides))
        self.observation_dim = 15

    def forward_kinematics(self, theta) -> tuple:
        c = self.config
        l1, l2 = c.link_lengths
        t1, t2 = theta
        x = c.base[0] + l1 * math.cos(t1) + l2 * math.cos(t1 + t2)
        y = c.base[1] + l1 * math.sin(t1) + l2 * math.sin(t1 + t2)
        return (x, y)

    def _in_workspace(self, p):
        c = self.config
        return c.hand_low[0] <= p[0] <= c.hand_high[0] and c.hand_low[1] <= p[1] <= c.hand_high[1]

    def reset(self, seed=None):
        rng = as_rng(seed)
        c = self.config
        while True:
            theta = tuple(float(v) for v in rng.uniform(-math.pi, math.pi, 2))
            hand = self.forward_kinematics(theta)
            if self._in_workspace(hand):
                break
        in_hand = rng.random() < c.ball_in_hand_prob
        if in_hand:
            ball = hand
        else:
            ball = (float(rng.uniform(c.hand_low[0] + 0.05, c.hand_high[0])), c.floor_y)
        goal = self._sample_goal(rng)
        state = RobotState(theta, (0.0, 0.0), hand, (0.0, 0.0), not in_hand, ball, (0.0, 0.0),
                           in_hand, 0)
        return state, goal

    def step(self, state: RobotState, action, goal):
        c = self.config
        w1 = _clamp(float(action[0]), -1.0, 1.0) * c.max_joint_speed
        w2 = _clamp(float(action[1]), -1.0, 1.0) * c.max_joint_speed
        open_cmd = float(action[2]) > 0.0
        theta = (state.theta[0] + w1, state.theta[1] + w2)
        hand = self.forward_kinematics(theta)
        if not self._in_workspace(hand):
            theta, hand, w1, w2 = state.theta, state.hand_pos, 0.0, 0.0
        hand_vel = (hand[0] - state.hand_pos[0], hand[1] - state.hand_pos[1])
        ball_pos, ball_vel, held = self._ball_update(state, hand, hand_vel, open_cmd)
        nxt = RobotState(theta, (w1, w2), hand, hand_vel, open_cmd, ball_pos, ball_vel, held,
                         state.steps + 1)
        reward = self.reward(np.array(ball_pos), goal)
        return nxt, reward, nxt.steps >= self.horizon

    def observe(self, state: RobotState) -> np.ndarray:
        c = self.config
        t1, t2 = state.theta
        return np.array([
            math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2),
            state.hand_pos[0], state.hand_pos[1],
            state.theta_dot[0] / c.max_joint_speed, state.theta_dot[1] / c.max_joint_speed,
            state.hand_vel[0] / c.max_speed, state.hand_vel[1] / c.max_speed,
            *self._ball_features(state),
        ])
