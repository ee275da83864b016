"""
RL Environment - Gym-style graph rewriting environment and reward functions
"""

from graphdream.env.base import Env
from graphdream.env.environment import Action, EnvState, GraphOptEnv, StepResult, XferTuple
from graphdream.env.rewards import (
    INVALID_PENALTY,
    REWARD_PRESETS,
    RewardPreset,
    reward_combined,
    reward_incremental,
)

__all__ = [
    "INVALID_PENALTY",
    "REWARD_PRESETS",
    "Action",
    "Env",
    "EnvState",
    "GraphOptEnv",
    "RewardPreset",
    "StepResult",
    "XferTuple",
    "reward_combined",
    "reward_incremental",
]
