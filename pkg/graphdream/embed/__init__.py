from graphdream.embed.gnn import (
    EDGE_FEATURES,
    GLOBAL_FEATURES,
    NODE_FEATURES,
    GraphBatch,
    GraphTuple,
    batch,
    encode,
    gnn_forward,
    gnn_forward_batch,
    init_gnn,
)

__all__ = [
    "EDGE_FEATURES",
    "GLOBAL_FEATURES",
    "NODE_FEATURES",
    "GraphBatch",
    "GraphTuple",
    "batch",
    "encode",
    "gnn_forward",
    "gnn_forward_batch",
    "init_gnn",
]
