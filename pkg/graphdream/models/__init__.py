"""
World model - MDN-RNN over graph latents, rollout collection and the dream environment
"""

from graphdream.models.rollouts import (
    Rollout,
    collect_random_rollouts,
    collect_rollout,
    pad_rollouts,
    uniform_valid_action,
)
from graphdream.models.world_model import (
    LOSS_COLUMNS,
    DreamEnv,
    DreamState,
    DreamTransition,
    GmmOutput,
    WmTrainResult,
    WorldModel,
    WorldModelDims,
    binarize_masks,
    dream_step,
    encode_action,
    evaluate_one_step,
    nll_loss,
    sample_next_z,
    train_wm,
    wm_forward,
    wm_loss,
)

__all__ = [
    "LOSS_COLUMNS",
    "DreamEnv",
    "DreamState",
    "DreamTransition",
    "GmmOutput",
    "Rollout",
    "WmTrainResult",
    "WorldModel",
    "WorldModelDims",
    "binarize_masks",
    "collect_random_rollouts",
    "collect_rollout",
    "dream_step",
    "encode_action",
    "evaluate_one_step",
    "nll_loss",
    "pad_rollouts",
    "sample_next_z",
    "train_wm",
    "uniform_valid_action",
    "wm_forward",
    "wm_loss",
]
