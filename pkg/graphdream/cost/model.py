"""
Cost Model - Closed-form FLOP, memory-access and kernel-launch estimates per operator
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence

import pandas as pd

from graphdream.graph.ir import ComputationGraph, Node, OpKind, TensorShape


@dataclass(frozen=True)
class CostWeights:
    """Milliseconds per FLOP, per element access, per kernel launch"""
    w_flops: float = 1e-9
    w_mem: float = 5e-9
    w_launch: float = 5e-3

    @classmethod
    def from_settings(cls, settings) -> "CostWeights":
        return cls(settings.w_flops, settings.w_mem, settings.w_launch)

    def scaled(self, factor: float) -> "CostWeights":
        return CostWeights(self.w_flops * factor, self.w_mem * factor, self.w_launch * factor)


DEFAULT_WEIGHTS = CostWeights()


@dataclass(frozen=True)
class CostBreakdown:
    """Counted work of one node or a whole graph; runtime_est derives from the weights"""
    flops: int = 0
    mem_accesses: int = 0
    kernel_launches: int = 0
    weights: CostWeights = DEFAULT_WEIGHTS

    @property
    def runtime_est(self) -> float:
        w = self.weights
        return w.w_flops * self.flops + w.w_mem * self.mem_accesses + w.w_launch * self.kernel_launches

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.flops + other.flops,
            self.mem_accesses + other.mem_accesses,
            self.kernel_launches + other.kernel_launches,
            self.weights,
        )

    def scaled(self, factor: int) -> "CostBreakdown":
        return CostBreakdown(self.flops * factor, self.mem_accesses * factor, self.kernel_launches * factor, self.weights)

    def with_weights(self, weights: CostWeights) -> "CostBreakdown":
        return CostBreakdown(self.flops, self.mem_accesses, self.kernel_launches, weights)

    def as_dict(self) -> Dict[str, float]:
        return {
            "runtime": self.runtime_est,
            "flops": self.flops,
            "mem": self.mem_accesses,
            "launches": self.kernel_launches,
        }


def _matmul_counts(a: TensorShape, b: TensorShape):
    batch = 1
    for d in a.dims[:-2]:
        batch *= d
    m, k, n = a[-2], a[-1], b[-1]
    return 2 * batch * m * k * n, batch * (m * k + k * n + m * n), batch * m * n


def _conv_counts(x: TensorShape, w: TensorShape, out: TensorShape):
    _, c, kh, kw = w.dims
    return 2 * out.numel * c * kh * kw, x.numel + w.numel + out.numel, out.numel


def op_cost(node: Node, shapes: Mapping[int, TensorShape],
            weights: CostWeights = DEFAULT_WEIGHTS) -> CostBreakdown:
    """Closed-form counts for one node; sources cost nothing"""
    kind = node.kind
    if kind in (OpKind.INPUT, OpKind.CONSTANT):
        return CostBreakdown(weights=weights)
    ins = [shapes[i] for i in node.inputs]
    out = shapes[node.id]
    n = out.numel

    if kind in (OpKind.MATMUL, OpKind.FUSED_MATMUL_RELU):
        flops, mem, produced = _matmul_counts(ins[0], ins[1])
        if kind == OpKind.FUSED_MATMUL_RELU:
            flops += produced
    elif kind in (OpKind.CONV2D, OpKind.FUSED_CONV_RELU):
        flops, mem, produced = _conv_counts(ins[0], ins[1], out)
        if kind == OpKind.FUSED_CONV_RELU:
            flops += produced
    elif kind in (OpKind.ADD, OpKind.MUL):
        flops, mem = n, 3 * n
    elif kind == OpKind.FUSED_ADD_N:
        j = len(ins)
        flops, mem = (j - 1) * n, (j + 1) * n
    elif kind == OpKind.RELU:
        flops, mem = n, 2 * n
    elif kind in (OpKind.CONCAT, OpKind.SPLIT, OpKind.TRANSPOSE):
        flops, mem = 0, 2 * n
    elif kind == OpKind.LAYER_NORM_APPROX:
        flops, mem = 4 * n, 2 * n
    elif kind == OpKind.SOFTMAX_APPROX:
        flops, mem = 5 * n, 2 * n
    else:
        raise ValueError(f"no cost rule for {kind}")
    return CostBreakdown(flops, mem, 1, weights)


def graph_cost(graph: ComputationGraph, weights: CostWeights = DEFAULT_WEIGHTS) -> CostBreakdown:
    """Fieldwise sum of op_cost over all nodes"""
    total = CostBreakdown(weights=weights)
    for node in graph.nodes.values():
        total = total + op_cost(node, graph.shapes, weights)
    return total


METRIC_COLUMNS = ["runtime", "flops", "mem", "launches"]


def metric_correlation(records: Iterable[Mapping[str, float]],
                       columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Pearson correlation matrix over per-step telemetry records
    """
    columns = list(columns or METRIC_COLUMNS)
    frame = pd.DataFrame(list(records), columns=columns)
    if len(frame) < 2:
        return pd.DataFrame(index=columns, columns=columns, dtype=float)
    return frame[columns].astype(float).corr(method="pearson")
