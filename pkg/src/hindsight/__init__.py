"""Goal-conditioned DDPG with filtered hindsight relabeling and instructive
virtual-goal sampling."""

from .agent import (ActorCritic, AgentConfig, AlgoConfig, HindsightDDPG, RunArtifacts,
                    build_actor_critic, run_training)
from .envs import make_env
from .exceptions import ConfigurationError, NumericError, PreconditionError, ShapeError

__version__ = "0.1.0"

__all__ = [
    "ActorCritic", "AgentConfig", "AlgoConfig", "ConfigurationError", "HindsightDDPG",
    "NumericError", "PreconditionError", "RunArtifacts", "ShapeError", "build_actor_critic",
    "make_env", "run_training",
]
