"""
NN Core - The small numeric substrate shared by the encoder, world model and controller
"""

from graphdream.nn.checkpoint import load_checkpoint, save_checkpoint
from graphdream.nn.core import (
    DTYPE,
    LstmState,
    ParamStore,
    adam_update,
    add_dense,
    add_lstm,
    check_gradients,
    dense,
    entropy,
    lstm_step,
    poly_decay_lr,
    softmax_t,
    softmax_t_np,
)

__all__ = [
    "DTYPE",
    "LstmState",
    "ParamStore",
    "adam_update",
    "add_dense",
    "add_lstm",
    "check_gradients",
    "dense",
    "entropy",
    "load_checkpoint",
    "lstm_step",
    "poly_decay_lr",
    "save_checkpoint",
    "softmax_t",
    "softmax_t_np",
]
