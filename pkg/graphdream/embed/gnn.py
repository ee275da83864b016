"""
Graph Embedding - Graph-tuple featurization and a message-passing encoder to a latent vector
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import torch

from graphdream.cost.model import DEFAULT_WEIGHTS, CostWeights, graph_cost, op_cost
from graphdream.graph.hashing import canonical_order
from graphdream.graph.ir import MAX_RANK, ComputationGraph, OpKind
from graphdream.nn.core import DTYPE, ParamStore, add_dense, dense

KINDS: List[OpKind] = list(OpKind)
KIND_INDEX = {kind: i for i, kind in enumerate(KINDS)}

# one-hot kind, log dims, rank, log flops, log mem, launches
NODE_FEATURES = len(KINDS) + MAX_RANK + 1 + 3
# log numel of the carried tensor, input position
EDGE_FEATURES = 2
# node count, total runtime, step index
GLOBAL_FEATURES = 3


@dataclass(frozen=True)
class GraphTuple:
    """Graph observation in canonical node order"""
    node_features: np.ndarray  # (n, NODE_FEATURES)
    edges: np.ndarray  # (E, 2) src, dst row indices
    edge_features: np.ndarray  # (E, EDGE_FEATURES)
    global_features: np.ndarray  # (GLOBAL_FEATURES,)

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def with_step(self, step_index: int) -> "GraphTuple":
        globals_ = self.global_features.copy()
        globals_[2] = step_index
        return GraphTuple(self.node_features, self.edges, self.edge_features, globals_)

    def equals(self, other: "GraphTuple") -> bool:
        return (
            np.array_equal(self.node_features, other.node_features)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.edge_features, other.edge_features)
            and np.array_equal(self.global_features, other.global_features)
        )


def encode(graph: ComputationGraph, step_index: int = 0, weights: CostWeights = DEFAULT_WEIGHTS) -> GraphTuple:
    """Deterministic featurization of a shape-inferred graph"""
    order = canonical_order(graph)
    row = {node_id: i for i, node_id in enumerate(order)}

    nodes = np.zeros((len(order), NODE_FEATURES), dtype=np.float64)
    for i, node_id in enumerate(order):
        node = graph.nodes[node_id]
        shape = graph.shapes[node_id]
        nodes[i, KIND_INDEX[node.kind]] = 1.0
        offset = len(KINDS)
        for d, size in enumerate(shape.dims):
            nodes[i, offset + d] = np.log1p(size)
        nodes[i, offset + MAX_RANK] = shape.rank / MAX_RANK
        cost = op_cost(node, graph.shapes, weights)
        nodes[i, offset + MAX_RANK + 1] = np.log1p(cost.flops)
        nodes[i, offset + MAX_RANK + 2] = np.log1p(cost.mem_accesses)
        nodes[i, offset + MAX_RANK + 3] = cost.kernel_launches

    edges = []
    edge_features = []
    for node_id in order:
        node = graph.nodes[node_id]
        for pos, src in enumerate(node.inputs):
            edges.append((row[src], row[node_id]))
            edge_features.append((np.log1p(graph.shapes[src].numel), pos / MAX_RANK))

    total = graph_cost(graph, weights)
    return GraphTuple(
        node_features=nodes,
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        edge_features=np.asarray(edge_features, dtype=np.float64).reshape(-1, EDGE_FEATURES),
        global_features=np.asarray([len(order), total.runtime_est, step_index], dtype=np.float64),
    )


@dataclass
class GraphBatch:
    """Disjoint union of graph tuples as torch tensors"""
    nodes: torch.Tensor
    edges: torch.Tensor
    edge_features: torch.Tensor
    globals: torch.Tensor  # (B, GLOBAL_FEATURES)
    node_graph: torch.Tensor  # graph index per node
    edge_graph: torch.Tensor  # graph index per edge

    @property
    def size(self) -> int:
        return self.globals.shape[0]


def batch(tuples: Sequence[GraphTuple]) -> GraphBatch:
    node_blocks, edge_blocks, efeat_blocks, node_graph, edge_graph = [], [], [], [], []
    offset = 0
    for g, gt in enumerate(tuples):
        node_blocks.append(gt.node_features)
        edge_blocks.append(gt.edges + offset)
        efeat_blocks.append(gt.edge_features)
        node_graph.append(np.full(gt.n_nodes, g, dtype=np.int64))
        edge_graph.append(np.full(gt.n_edges, g, dtype=np.int64))
        offset += gt.n_nodes
    return GraphBatch(
        nodes=torch.as_tensor(np.concatenate(node_blocks), dtype=DTYPE),
        edges=torch.as_tensor(np.concatenate(edge_blocks).reshape(-1, 2), dtype=torch.long),
        edge_features=torch.as_tensor(np.concatenate(efeat_blocks).reshape(-1, EDGE_FEATURES), dtype=DTYPE),
        globals=torch.as_tensor(np.stack([gt.global_features for gt in tuples]), dtype=DTYPE),
        node_graph=torch.as_tensor(np.concatenate(node_graph), dtype=torch.long),
        edge_graph=torch.as_tensor(np.concatenate(edge_graph), dtype=torch.long),
    )


def init_gnn(store: ParamStore, hidden: int, latent_dim: int, rounds: int,
             generator: Optional[torch.Generator] = None, prefix: str = "gnn"):
    add_dense(store, f"{prefix}.node_in", NODE_FEATURES, hidden, generator)
    add_dense(store, f"{prefix}.edge_in", EDGE_FEATURES, hidden, generator)
    add_dense(store, f"{prefix}.glob_in", GLOBAL_FEATURES, hidden, generator)
    for k in range(rounds):
        add_dense(store, f"{prefix}.edge{k}", 4 * hidden, hidden, generator)
        add_dense(store, f"{prefix}.node{k}", 3 * hidden, hidden, generator)
        add_dense(store, f"{prefix}.glob{k}", 3 * hidden, hidden, generator)
    add_dense(store, f"{prefix}.readout", 2 * hidden, latent_dim, generator)


def _segment_sum(values: torch.Tensor, segments: torch.Tensor, count: int) -> torch.Tensor:
    out = torch.zeros((count, values.shape[-1]), dtype=values.dtype)
    return out.index_add(0, segments, values)


def gnn_forward_batch(gb: GraphBatch, store: ParamStore, rounds: int, prefix: str = "gnn") -> torch.Tensor:
    """
    Edge, node, then global updates with sum aggregation for `rounds` rounds, then a
    dense readout over [global state, summed node states]. Returns (B, Z).
    """
    relu = torch.relu
    n_nodes = gb.nodes.shape[0]
    h = relu(dense(gb.nodes, store, f"{prefix}.node_in"))
    e = relu(dense(gb.edge_features, store, f"{prefix}.edge_in"))
    g = relu(dense(torch.log1p(gb.globals.abs()), store, f"{prefix}.glob_in"))
    src, dst = gb.edges[:, 0], gb.edges[:, 1]

    for k in range(rounds):
        e = relu(dense(torch.cat([e, h[src], h[dst], g[gb.edge_graph]], dim=-1), store, f"{prefix}.edge{k}"))
        incoming = _segment_sum(e, dst, n_nodes)
        h = relu(dense(torch.cat([h, incoming, g[gb.node_graph]], dim=-1), store, f"{prefix}.node{k}"))
        node_sum = _segment_sum(h, gb.node_graph, gb.size)
        edge_sum = _segment_sum(e, gb.edge_graph, gb.size)
        g = relu(dense(torch.cat([g, node_sum, edge_sum], dim=-1), store, f"{prefix}.glob{k}"))

    node_sum = _segment_sum(h, gb.node_graph, gb.size)
    return dense(torch.cat([g, node_sum], dim=-1), store, f"{prefix}.readout")


def gnn_forward(gt: GraphTuple, store: ParamStore, rounds: int, prefix: str = "gnn") -> torch.Tensor:
    """Latent z of shape (Z,) for one graph tuple"""
    return gnn_forward_batch(batch([gt]), store, rounds, prefix)[0]
