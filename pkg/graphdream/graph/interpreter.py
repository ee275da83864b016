"""
Interpreter - Reference float64 evaluator and the empirical equivalence oracle
"""

from functools import reduce
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from graphdream.exceptions import MissingInput, ShapeMismatch
from graphdream.graph.ir import ComputationGraph, Node, OpKind

DEFAULT_RTOL = 1e-5
DEFAULT_ATOL = 1e-6

Tensor = np.ndarray


def _conv2d(node: Node, x: Tensor, w: Tensor) -> Tensor:
    stride = int(node.attr("stride", 1))
    padding = int(node.attr("padding", 0))
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    kh, kw = w.shape[2], w.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.einsum("nchwij,ocij->nohw", windows, w, optimize=False)


def _layer_norm_approx(x: Tensor) -> Tensor:
    return x / np.sqrt(1.0 + x * x)


def _softmax_approx(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x))
    return s / s.sum(axis=-1, keepdims=True)


def _relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


KERNELS: Dict[OpKind, Callable[..., Tensor]] = {
    OpKind.MATMUL: lambda node, a, b: np.matmul(a, b),
    OpKind.CONV2D: _conv2d,
    OpKind.ADD: lambda node, a, b: a + b,
    OpKind.MUL: lambda node, a, b: a * b,
    OpKind.RELU: lambda node, x: _relu(x),
    OpKind.CONCAT: lambda node, *xs: np.concatenate(xs, axis=int(node.attr("axis", 0))),
    OpKind.SPLIT: lambda node, x: np.split(x, int(node.attr("parts", 2)), axis=int(node.attr("axis", 0)))[
        int(node.attr("index", 0))
    ],
    OpKind.TRANSPOSE: lambda node, x: np.transpose(x, node.attr("perm", tuple(reversed(range(x.ndim))))),
    OpKind.LAYER_NORM_APPROX: lambda node, x: _layer_norm_approx(x),
    OpKind.SOFTMAX_APPROX: lambda node, x: _softmax_approx(x),
    OpKind.FUSED_ADD_N: lambda node, *xs: reduce(np.add, xs),
    OpKind.FUSED_MATMUL_RELU: lambda node, a, b: _relu(np.matmul(a, b)),
    OpKind.FUSED_CONV_RELU: lambda node, x, w: _relu(_conv2d(node, x, w)),
}


def evaluate(graph: ComputationGraph, inputs: Mapping[int, Tensor]) -> List[Tensor]:
    """
    Forward-evaluate a shape-inferred graph in topological order.

    `inputs` maps Input node ids to float64 tensors; ids of other nodes are ignored.
    """
    values: Dict[int, Tensor] = {}
    for node_id in graph.topological_order():
        node = graph.nodes[node_id]
        expected = graph.shapes.get(node_id)
        if node.kind == OpKind.INPUT:
            if node_id not in inputs:
                raise MissingInput(f"no tensor supplied for Input node {node_id}")
            value = np.asarray(inputs[node_id], dtype=np.float64)
            if expected is not None and value.shape != expected.dims:
                raise ShapeMismatch(f"Input node {node_id}: got {value.shape}, expected {expected.dims}")
        elif node.kind == OpKind.CONSTANT:
            value = np.asarray(node.attr("value"), dtype=np.float64).reshape(node.attr("shape"))
        else:
            value = KERNELS[node.kind](node, *[values[i] for i in node.inputs])
        values[node_id] = value
    return [values[o] for o in graph.outputs]


def random_inputs(graph: ComputationGraph, rng: np.random.Generator) -> Dict[int, Tensor]:
    """One standard-normal float64 tensor per Input node, in ascending id order"""
    return {i: rng.standard_normal(graph.shapes[i].dims) for i in graph.input_ids}


def outputs_close(a: Sequence[Tensor], b: Sequence[Tensor],
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> bool:
    if len(a) != len(b):
        return False
    return all(x.shape == y.shape and np.allclose(x, y, rtol=rtol, atol=atol) for x, y in zip(a, b))


def equivalent(reference: ComputationGraph, candidate: ComputationGraph, trials: int,
               rng: np.random.Generator, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
               inputs_from: Optional[ComputationGraph] = None) -> bool:
    """
    Empirical equivalence: both graphs agree on `trials` random input assignments.

    Inputs are drawn for the Input nodes of `inputs_from` (default: reference), so a
    candidate that dropped an unused input still evaluates.
    """
    source = inputs_from or reference
    for _ in range(trials):
        feed = random_inputs(source, rng)
        try:
            if not outputs_close(evaluate(reference, feed), evaluate(candidate, feed), rtol, atol):
                return False
        except (MissingInput, ShapeMismatch):
            return False
    return True
