"""
Graph IR - computation graphs, shape inference, interpreter, hashing, file format
"""

from graphdream.graph.hashing import canonical_hash, canonical_order
from graphdream.graph.interpreter import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    equivalent,
    evaluate,
    outputs_close,
    random_inputs,
)
from graphdream.graph.ir import (
    ARITY,
    ComputationGraph,
    GraphBuilder,
    Node,
    OpKind,
    TensorShape,
)
from graphdream.graph.serialization import dumps_graph, load_graph, loads_graph, save_graph
from graphdream.graph.shapes import ValidationReport, Violation, infer_shapes, validate

__all__ = [
    "ARITY",
    "DEFAULT_ATOL",
    "DEFAULT_RTOL",
    "ComputationGraph",
    "GraphBuilder",
    "Node",
    "OpKind",
    "TensorShape",
    "ValidationReport",
    "Violation",
    "canonical_hash",
    "canonical_order",
    "dumps_graph",
    "equivalent",
    "evaluate",
    "infer_shapes",
    "load_graph",
    "loads_graph",
    "outputs_close",
    "random_inputs",
    "save_graph",
    "validate",
]
