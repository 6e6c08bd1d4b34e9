from ..exceptions import ConfigurationError
from .base import Episode, GoalEnv, config_from_dict, rollout, write_trace
from .bitflip import BitFlipConfig, BitFlipEnv, BitFlipState
from .throw import (HandEnv, HandWallEnv, RobotConfig, RobotEnv, RobotState, ThrowConfig,
                    ThrowState)

ENVIRONMENTS = {
    "bitflip": (BitFlipEnv, BitFlipConfig),
    "hand": (HandEnv, ThrowConfig),
    "hand-wall": (HandWallEnv, ThrowConfig),
    "robot": (RobotEnv, RobotConfig),
}


def make_env(name: str, **params) -> GoalEnv:
    """Build an environment by name; ``params`` override its config defaults."""
    if name not in ENVIRONMENTS:
        raise ConfigurationError(f"unknown environment {name!r}; expected one of {sorted(ENVIRONMENTS)}")
    env_cls, cfg_cls = ENVIRONMENTS[name]
    if name == "hand-wall":
        params.setdefault("wall_x", 0.45)
    return env_cls(config_from_dict(cfg_cls, params))


__all__ = [
    "BitFlipConfig", "BitFlipEnv", "BitFlipState", "ENVIRONMENTS", "Episode", "GoalEnv",
    "HandEnv", "HandWallEnv", "RobotConfig", "RobotEnv", "RobotState", "ThrowConfig",
    "ThrowState", "make_env", "rollout", "write_trace",
]
