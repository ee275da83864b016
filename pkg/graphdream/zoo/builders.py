"""
Model Zoo - Deterministic toy-scale builders for the evaluation graphs
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from graphdream.exceptions import InvalidSpec
from graphdream.graph.ir import ComputationGraph, GraphBuilder

MAX_DIM = 16
MAX_DEPTH = 8
TOKENS = 4
SPATIAL = 6
BATCH = 2


@dataclass(frozen=True)
class ZooSpec:
    name: str
    depth: int
    width: int

    def validate(self):
        if self.name not in BUILDERS:
            raise InvalidSpec(f"unknown zoo graph {self.name!r}; expected one of {', '.join(ZOO_NAMES)}")
        if not 1 <= self.depth <= MAX_DEPTH:
            raise InvalidSpec(f"{self.name}: depth must be in [1, {MAX_DEPTH}], got {self.depth}")
        if not 2 <= self.width <= MAX_DIM or self.width % 2:
            raise InvalidSpec(f"{self.name}: width must be an even number in [2, {MAX_DIM}], got {self.width}")


# -- transformer family ------------------------------------------------------------------


def _encoder_block(b: GraphBuilder, x: int, d: int) -> int:
    """Attention, then Add&Norm, feed-forward, Add&Norm; each residual adds a bias first"""
    q = b.matmul(x, b.input((d, d)))
    k = b.matmul(x, b.input((d, d)))
    v = b.matmul(x, b.input((d, d)))
    scores = b.matmul(q, b.transpose(k, (1, 0)))
    attn = b.matmul(b.softmax(scores), v)
    proj = b.matmul(attn, b.input((d, d)))
    y = b.layer_norm(b.add_(b.add_(proj, b.input((TOKENS, d))), x))

    hidden = b.relu(b.matmul(y, b.input((d, 2 * d))))
    ff = b.matmul(hidden, b.input((2 * d, d)))
    return b.layer_norm(b.add_(b.add_(ff, b.input((TOKENS, d))), y))


def build_bert_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    x = b.input((TOKENS, width))
    for _ in range(depth):
        x = _encoder_block(b, x, width)
    b.output(x)
    return b


def build_vit_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    patches = b.input((TOKENS, MAX_DIM))
    embedded = b.matmul(patches, b.input((MAX_DIM, width)))
    x = b.add_(b.add_(embedded, b.input((TOKENS, width))), b.input((TOKENS, width)))
    for _ in range(depth):
        x = _encoder_block(b, x, width)
    b.output(x)
    return b


def build_mlp_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    x = b.input((BATCH, width))
    for _ in range(depth):
        h = b.relu(b.matmul(x, b.input((width, width))))
        left = b.matmul(h, b.input((width, width)))
        right = b.matmul(h, b.input((width, width)))
        x = b.relu(b.add_(left, right))
    half = width // 2
    head_a = b.matmul(x, b.input((width, half)))
    head_b = b.matmul(x, b.input((width, half)))
    b.output(b.concat([head_a, head_b], axis=1))
    return b


# -- convolutional family ----------------------------------------------------------------


def build_resnet_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    x = b.input((1, width, SPATIAL, SPATIAL))
    for _ in range(depth):
        y = b.relu(b.conv2d(x, b.input((width, width, 3, 3)), padding=1))
        y = b.conv2d(y, b.input((width, width, 3, 3)), padding=1)
        x = b.relu(b.add_(y, x))
    b.output(x)
    return b


def build_inception_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    x = b.input((1, width, SPATIAL, SPATIAL))
    half = width // 2
    for _ in range(depth):
        point = b.relu(b.conv2d(x, b.input((half, width, 1, 1))))
        spatial = b.relu(b.conv2d(x, b.input((half, width, 3, 3)), padding=1))
        joined = b.concat([point, spatial], axis=1)
        x = b.relu(b.conv2d(joined, b.input((width, width, 1, 1))))
    b.output(x)
    return b


def build_squeezenet_toy(depth: int, width: int) -> GraphBuilder:
    b = GraphBuilder()
    x = b.input((1, width, SPATIAL, SPATIAL))
    half = width // 2
    for _ in range(depth):
        squeeze = b.relu(b.conv2d(x, b.input((half, width, 1, 1))))
        expand1 = b.relu(b.conv2d(squeeze, b.input((half, half, 1, 1))))
        expand3 = b.relu(b.conv2d(squeeze, b.input((half, half, 3, 3)), padding=1))
        x = b.concat([expand1, expand3], axis=1)
    b.output(x)
    return b


BUILDERS: Dict[str, Callable[[int, int], GraphBuilder]] = {
    "resnet_toy": build_resnet_toy,
    "inception_toy": build_inception_toy,
    "squeezenet_toy": build_squeezenet_toy,
    "bert_toy": build_bert_toy,
    "vit_toy": build_vit_toy,
    "mlp_toy": build_mlp_toy,
}

ZOO_NAMES: Tuple[str, ...] = tuple(BUILDERS)

DEFAULT_SPECS: Dict[str, ZooSpec] = {
    "resnet_toy": ZooSpec("resnet_toy", 2, 4),
    "inception_toy": ZooSpec("inception_toy", 2, 4),
    "squeezenet_toy": ZooSpec("squeezenet_toy", 2, 8),
    "bert_toy": ZooSpec("bert_toy", 2, 8),
    "vit_toy": ZooSpec("vit_toy", 2, 8),
    "mlp_toy": ZooSpec("mlp_toy", 3, 8),
}


def build(spec: ZooSpec) -> ComputationGraph:
    """Well-formed, shape-inferred graph; the same spec always gives the same graph"""
    spec.validate()
    return BUILDERS[spec.name](spec.depth, spec.width).build()


def build_by_name(name: str, depth: Optional[int] = None, width: Optional[int] = None) -> ComputationGraph:
    if name not in DEFAULT_SPECS:
        raise InvalidSpec(f"unknown zoo graph {name!r}; expected one of {', '.join(ZOO_NAMES)}")
    default = DEFAULT_SPECS[name]
    return build(ZooSpec(name, depth or default.depth, width or default.width))
