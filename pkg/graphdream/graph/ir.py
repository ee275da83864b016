"""
Graph IR - Typed tensor computation graph
"""

import heapq
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from graphdream.exceptions import MalformedGraph


MAX_RANK = 4


class OpKind(str, Enum):
    """Operator vocabulary"""
    INPUT = "Input"
    CONSTANT = "Constant"
    MATMUL = "MatMul"
    CONV2D = "Conv2d"
    ADD = "Add"
    MUL = "Mul"
    RELU = "Relu"
    CONCAT = "Concat"
    SPLIT = "Split"
    TRANSPOSE = "Transpose"
    LAYER_NORM_APPROX = "LayerNormApprox"
    SOFTMAX_APPROX = "SoftmaxApprox"
    FUSED_ADD_N = "FusedAddN"
    FUSED_MATMUL_RELU = "FusedMatMulRelu"
    FUSED_CONV_RELU = "FusedConvRelu"


# (min arity, max arity); None = unbounded
ARITY: Dict[OpKind, Tuple[int, Optional[int]]] = {
    OpKind.INPUT: (0, 0),
    OpKind.CONSTANT: (0, 0),
    OpKind.MATMUL: (2, 2),
    OpKind.CONV2D: (2, 2),
    OpKind.ADD: (2, 2),
    OpKind.MUL: (2, 2),
    OpKind.RELU: (1, 1),
    OpKind.CONCAT: (2, None),
    OpKind.SPLIT: (1, 1),
    OpKind.TRANSPOSE: (1, 1),
    OpKind.LAYER_NORM_APPROX: (1, 1),
    OpKind.SOFTMAX_APPROX: (1, 1),
    OpKind.FUSED_ADD_N: (2, None),
    OpKind.FUSED_MATMUL_RELU: (2, 2),
    OpKind.FUSED_CONV_RELU: (2, 2),
}

SOURCE_KINDS = frozenset({OpKind.INPUT, OpKind.CONSTANT})


def arity_ok(kind: OpKind, n_inputs: int) -> bool:
    low, high = ARITY[kind]
    return n_inputs >= low and (high is None or n_inputs <= high)


@dataclass(frozen=True)
class TensorShape:
    """Positive dims, rank 1..4"""
    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not 1 <= len(dims) <= MAX_RANK:
            raise ValueError(f"rank must be in [1, {MAX_RANK}], got {len(dims)}")
        if any(d < 1 for d in dims):
            raise ValueError(f"dims must be >= 1, got {dims}")

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def numel(self) -> int:
        total = 1
        for d in self.dims:
            total *= d
        return total

    def __iter__(self) -> Iterator[int]:
        return iter(self.dims)

    def __len__(self) -> int:
        return len(self.dims)

    def __getitem__(self, index):
        return self.dims[index]

    def __repr__(self) -> str:
        return f"TensorShape{self.dims}"


def freeze_attr(value: Any) -> Any:
    """Normalize attribute values to ints, floats, or (nested) tuples of them"""
    if isinstance(value, (list, tuple)):
        return tuple(freeze_attr(v) for v in value)
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        return value
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"unsupported attribute value: {value!r}")


@dataclass(frozen=True)
class Node:
    """One operator application"""
    id: int
    kind: OpKind
    inputs: Tuple[int, ...] = ()
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", OpKind(self.kind))
        object.__setattr__(self, "inputs", tuple(int(i) for i in self.inputs))
        object.__setattr__(self, "attrs", {k: freeze_attr(v) for k, v in dict(self.attrs).items()})

    def attr(self, key: str, default: Any = None) -> Any:
        return self.attrs.get(key, default)

    def with_inputs(self, inputs: Sequence[int]) -> "Node":
        return replace(self, inputs=tuple(inputs))


@dataclass(frozen=True)
class ComputationGraph:
    """
    DAG of typed tensor operators.

    Values are treated as immutable: every transformation returns a new graph.
    `shapes` is empty until infer_shapes populates it.
    """
    nodes: Mapping[int, Node]
    outputs: Tuple[int, ...]
    shapes: Mapping[int, TensorShape] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(sorted(dict(self.nodes).items())))
        object.__setattr__(self, "outputs", tuple(int(o) for o in self.outputs))
        object.__setattr__(self, "shapes", dict(self.shapes))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def shape(self, node_id: int) -> TensorShape:
        return self.shapes[node_id]

    @property
    def has_shapes(self) -> bool:
        return len(self.shapes) == len(self.nodes) and all(i in self.shapes for i in self.nodes)

    @property
    def input_ids(self) -> List[int]:
        return [i for i, n in self.nodes.items() if n.kind == OpKind.INPUT]

    @property
    def next_id(self) -> int:
        return max(self.nodes, default=-1) + 1

    def consumers(self) -> Dict[int, List[Tuple[int, int]]]:
        """node id -> [(consumer id, input position)] in ascending consumer order"""
        result: Dict[int, List[Tuple[int, int]]] = {i: [] for i in self.nodes}
        for node in self.nodes.values():
            for pos, src in enumerate(node.inputs):
                if src in result:
                    result[src].append((node.id, pos))
        return result

    def topological_order(self) -> List[int]:
        """
        Kahn's algorithm with smallest-id-first tie-break; raises MalformedGraph on a cycle
        or a reference to a missing node
        """
        indegree: Dict[int, int] = {}
        users: Dict[int, List[int]] = {i: [] for i in self.nodes}
        for node in self.nodes.values():
            indegree[node.id] = 0
            for src in node.inputs:
                if src not in self.nodes:
                    raise MalformedGraph(f"node {node.id} references missing node {src}")
                users[src].append(node.id)
        for node in self.nodes.values():
            indegree[node.id] = len(node.inputs)

        ready = [i for i, d in indegree.items() if d == 0]
        heapq.heapify(ready)
        order: List[int] = []
        while ready:
            current = heapq.heappop(ready)
            order.append(current)
            for user in users[current]:
                indegree[user] -= 1
                if indegree[user] == 0:
                    heapq.heappush(ready, user)
        if len(order) != len(self.nodes):
            raise MalformedGraph("graph contains a cycle")
        return order

    def without_shapes(self) -> "ComputationGraph":
        return ComputationGraph(self.nodes, self.outputs)

    def relabeled(self, mapping: Mapping[int, int]) -> "ComputationGraph":
        """Rename node ids through `mapping` (must be a bijection over node ids)"""
        nodes = {
            mapping[n.id]: Node(mapping[n.id], n.kind, tuple(mapping[i] for i in n.inputs), n.attrs)
            for n in self.nodes.values()
        }
        shapes = {mapping[i]: s for i, s in self.shapes.items()}
        return ComputationGraph(nodes, tuple(mapping[o] for o in self.outputs), shapes)

    def reachable(self) -> List[int]:
        """Ids reachable backwards from the outputs"""
        seen = set()
        stack = [o for o in self.outputs if o in self.nodes]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            stack.extend(self.nodes[current].inputs)
        return sorted(seen)

    def compute_nodes(self) -> List[Node]:
        return [n for n in self.nodes.values() if n.kind not in SOURCE_KINDS]


class GraphBuilder:
    """
    Fluent helper for assembling graphs in code:

        b = GraphBuilder()
        x = b.input((2, 3))
        w = b.input((3, 4))
        b.output(b.relu(b.matmul(x, w)))
        graph = b.build()
    """

    def __init__(self):
        self._nodes: Dict[int, Node] = {}
        self._outputs: List[int] = []
        self._next = 0

    def add(self, kind: OpKind, inputs: Sequence[int] = (), **attrs: Any) -> int:
        node_id = self._next
        self._next += 1
        self._nodes[node_id] = Node(node_id, OpKind(kind), tuple(inputs), attrs)
        return node_id

    def input(self, shape: Sequence[int]) -> int:
        return self.add(OpKind.INPUT, shape=tuple(shape))

    def constant(self, shape: Sequence[int], values: Sequence[float]) -> int:
        return self.add(OpKind.CONSTANT, shape=tuple(shape), value=tuple(float(v) for v in values))

    def matmul(self, a: int, b: int) -> int:
        return self.add(OpKind.MATMUL, (a, b))

    def conv2d(self, x: int, w: int, stride: int = 1, padding: int = 0) -> int:
        return self.add(OpKind.CONV2D, (x, w), stride=stride, padding=padding)

    def add_(self, a: int, b: int) -> int:
        return self.add(OpKind.ADD, (a, b))

    def mul(self, a: int, b: int) -> int:
        return self.add(OpKind.MUL, (a, b))

    def relu(self, x: int) -> int:
        return self.add(OpKind.RELU, (x,))

    def concat(self, inputs: Sequence[int], axis: int) -> int:
        return self.add(OpKind.CONCAT, tuple(inputs), axis=axis)

    def split(self, x: int, axis: int, parts: int, index: int) -> int:
        return self.add(OpKind.SPLIT, (x,), axis=axis, parts=parts, index=index)

    def transpose(self, x: int, perm: Sequence[int]) -> int:
        return self.add(OpKind.TRANSPOSE, (x,), perm=tuple(perm))

    def layer_norm(self, x: int) -> int:
        return self.add(OpKind.LAYER_NORM_APPROX, (x,))

    def softmax(self, x: int) -> int:
        return self.add(OpKind.SOFTMAX_APPROX, (x,))

    def output(self, node_id: int) -> int:
        self._outputs.append(node_id)
        return node_id

    def build(self, infer: bool = True) -> ComputationGraph:
        graph = ComputationGraph(dict(self._nodes), tuple(self._outputs))
        if infer:
            from graphdream.graph.shapes import infer_shapes

            graph = infer_shapes(graph)
        return graph
