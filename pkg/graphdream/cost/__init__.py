"""
Cost Model - Analytic runtime estimate from FLOPs, memory accesses and kernel launches
"""

from graphdream.cost.model import (
    DEFAULT_WEIGHTS,
    CostBreakdown,
    CostWeights,
    graph_cost,
    metric_correlation,
    op_cost,
)

__all__ = ["DEFAULT_WEIGHTS", "CostBreakdown", "CostWeights", "graph_cost", "metric_correlation", "op_cost"]
