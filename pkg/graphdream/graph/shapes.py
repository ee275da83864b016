"""
Shape Inference - Per-operator shape rules, structural validation, and shape inference
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from graphdream.exceptions import MalformedGraph, ShapeMismatch
from graphdream.graph.ir import (
    ARITY,
    MAX_RANK,
    ComputationGraph,
    Node,
    OpKind,
    TensorShape,
    arity_ok,
)


def _same_shapes(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    first = shapes[0]
    for other in shapes[1:]:
        if other != first:
            raise ShapeMismatch(f"{node.kind.value} node {node.id}: operand shapes {first.dims} vs {other.dims}")
    return first


def _matmul(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    a, b = shapes
    if a.rank < 2 or b.rank < 2 or a.rank != b.rank:
        raise ShapeMismatch(f"MatMul node {node.id}: ranks {a.rank} and {b.rank}")
    if a.dims[:-2] != b.dims[:-2]:
        raise ShapeMismatch(f"MatMul node {node.id}: batch dims {a.dims[:-2]} vs {b.dims[:-2]}")
    if a[-1] != b[-2]:
        raise ShapeMismatch(f"MatMul node {node.id}: inner dims {a[-1]} vs {b[-2]}")
    return TensorShape(a.dims[:-1] + (b[-1],))


def _conv2d(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    x, w = shapes
    if x.rank != 4 or w.rank != 4:
        raise ShapeMismatch(f"Conv2d node {node.id}: expects rank-4 input and weight")
    stride = int(node.attr("stride", 1))
    padding = int(node.attr("padding", 0))
    if stride < 1 or padding < 0:
        raise ShapeMismatch(f"Conv2d node {node.id}: stride {stride}, padding {padding}")
    n, c, h, wd = x.dims
    o, wc, kh, kw = w.dims
    if c != wc:
        raise ShapeMismatch(f"Conv2d node {node.id}: input channels {c} vs weight channels {wc}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if h + 2 * padding < kh or wd + 2 * padding < kw or oh < 1 or ow < 1:
        raise ShapeMismatch(f"Conv2d node {node.id}: kernel {kh}x{kw} larger than padded input")
    return TensorShape((n, o, oh, ow))


def _axis(node: Node, rank: int) -> int:
    axis = int(node.attr("axis", 0))
    if not 0 <= axis < rank:
        raise ShapeMismatch(f"{node.kind.value} node {node.id}: axis {axis} out of range for rank {rank}")
    return axis


def _concat(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    rank = shapes[0].rank
    axis = _axis(node, rank)
    total = 0
    for s in shapes:
        if s.rank != rank:
            raise ShapeMismatch(f"Concat node {node.id}: mixed ranks")
        for d in range(rank):
            if d != axis and s[d] != shapes[0][d]:
                raise ShapeMismatch(f"Concat node {node.id}: dim {d} differs ({s[d]} vs {shapes[0][d]})")
        total += s[axis]
    dims = list(shapes[0].dims)
    dims[axis] = total
    return TensorShape(tuple(dims))


def _split(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    (x,) = shapes
    axis = _axis(node, x.rank)
    parts = int(node.attr("parts", 2))
    index = int(node.attr("index", 0))
    if parts < 1 or not 0 <= index < parts:
        raise ShapeMismatch(f"Split node {node.id}: index {index} of {parts} parts")
    if x[axis] % parts:
        raise ShapeMismatch(f"Split node {node.id}: dim {x[axis]} not divisible by {parts}")
    dims = list(x.dims)
    dims[axis] = x[axis] // parts
    return TensorShape(tuple(dims))


def _transpose(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    (x,) = shapes
    perm = tuple(node.attr("perm", tuple(reversed(range(x.rank)))))
    if sorted(perm) != list(range(x.rank)):
        raise ShapeMismatch(f"Transpose node {node.id}: perm {perm} invalid for rank {x.rank}")
    return TensorShape(tuple(x[p] for p in perm))


def _elementwise(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    return shapes[0]


def _source(node: Node, shapes: Sequence[TensorShape]) -> TensorShape:
    shape = node.attr("shape")
    if shape is None:
        raise ShapeMismatch(f"{node.kind.value} node {node.id}: missing shape attribute")
    try:
        result = TensorShape(tuple(shape))
    except ValueError as e:
        raise ShapeMismatch(f"{node.kind.value} node {node.id}: {e}") from e
    if node.kind == OpKind.CONSTANT:
        values = node.attr("value", ())
        if len(values) != result.numel:
            raise ShapeMismatch(f"Constant node {node.id}: {len(values)} values for shape {result.dims}")
    return result


SHAPE_RULES: Dict[OpKind, Callable[[Node, Sequence[TensorShape]], TensorShape]] = {
    OpKind.INPUT: _source,
    OpKind.CONSTANT: _source,
    OpKind.MATMUL: _matmul,
    OpKind.CONV2D: _conv2d,
    OpKind.ADD: _same_shapes,
    OpKind.MUL: _same_shapes,
    OpKind.RELU: _elementwise,
    OpKind.CONCAT: _concat,
    OpKind.SPLIT: _split,
    OpKind.TRANSPOSE: _transpose,
    OpKind.LAYER_NORM_APPROX: _elementwise,
    OpKind.SOFTMAX_APPROX: _elementwise,
    OpKind.FUSED_ADD_N: _same_shapes,
    OpKind.FUSED_MATMUL_RELU: _matmul,
    OpKind.FUSED_CONV_RELU: _conv2d,
}


def node_shape(node: Node, input_shapes: Sequence[TensorShape]) -> TensorShape:
    """Apply the shape rule of one node; raises ShapeMismatch"""
    if not arity_ok(node.kind, len(input_shapes)):
        raise MalformedGraph(f"{node.kind.value} node {node.id}: arity {len(input_shapes)} not in {ARITY[node.kind]}")
    result = SHAPE_RULES[node.kind](node, input_shapes)
    if result.rank > MAX_RANK:
        raise ShapeMismatch(f"node {node.id}: rank {result.rank} exceeds {MAX_RANK}")
    return result


@dataclass
class Violation:
    """One well-formedness failure"""
    category: str  # cycle | arity | reference | output | shape
    node_id: Optional[int]
    message: str


@dataclass
class ValidationReport:
    """Empty iff the graph is well-formed"""
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def categories(self) -> List[str]:
        return [v.category for v in self.violations]


def validate(graph: ComputationGraph) -> ValidationReport:
    """
    Report acyclicity, arity, reference, output, and shape-rule violations; never raises
    """
    report = ValidationReport()

    for node in graph.nodes.values():
        if node.id in node.inputs:
            report.violations.append(Violation("cycle", node.id, f"node {node.id} consumes itself"))
        for src in node.inputs:
            if src not in graph.nodes:
                report.violations.append(Violation("reference", node.id, f"node {node.id} references missing node {src}"))
        if not arity_ok(node.kind, len(node.inputs)):
            report.violations.append(Violation(
                "arity", node.id,
                f"{node.kind.value} node {node.id} has {len(node.inputs)} inputs, expected {ARITY[node.kind]}",
            ))

    if not graph.outputs:
        report.violations.append(Violation("output", None, "graph has no outputs"))
    for out in graph.outputs:
        if out not in graph.nodes:
            report.violations.append(Violation("output", out, f"output {out} is not a node"))

    if any(v.category in ("reference", "cycle") for v in report.violations):
        return report
    try:
        order = graph.topological_order()
    except MalformedGraph as e:
        report.violations.append(Violation("cycle", None, str(e)))
        return report

    if any(v.category == "arity" for v in report.violations):
        return report

    shapes: Dict[int, TensorShape] = {}
    for node_id in order:
        node = graph.nodes[node_id]
        if any(src not in shapes for src in node.inputs):
            continue
        try:
            shapes[node_id] = node_shape(node, [shapes[i] for i in node.inputs])
        except (ShapeMismatch, MalformedGraph) as e:
            report.violations.append(Violation("shape", node_id, str(e)))
    return report


def infer_shapes(graph: ComputationGraph) -> ComputationGraph:
    """
    Populate shapes for every node in topological order; idempotent.

    Raises MalformedGraph for structural problems and ShapeMismatch for operand shapes.
    """
    for out in graph.outputs:
        if out not in graph.nodes:
            raise MalformedGraph(f"output {out} is not a node")
    shapes: Dict[int, TensorShape] = {}
    for node_id in graph.topological_order():
        node = graph.nodes[node_id]
        shapes[node_id] = node_shape(node, [shapes[i] for i in node.inputs])
    return ComputationGraph(graph.nodes, graph.outputs, shapes)
