"""
Unit tests for the analytic cost model
"""

import pytest

from graphdream.cost.model import CostBreakdown, CostWeights, graph_cost, metric_correlation, op_cost
from graphdream.graph.ir import GraphBuilder, OpKind

pytestmark = pytest.mark.unit


class TestOpCost:
    """Closed-form counts per operator"""

    def test_matmul_relu_counts(self, matmul_relu_graph):
        total = graph_cost(matmul_relu_graph)
        assert (total.flops, total.mem_accesses, total.kernel_launches) == (48 + 8, 26 + 16, 2)

    def test_sources_are_free(self, matmul_relu_graph):
        for node_id in matmul_relu_graph.input_ids:
            cost = op_cost(matmul_relu_graph.node(node_id), matmul_relu_graph.shapes)
            assert (cost.flops, cost.mem_accesses, cost.kernel_launches) == (0, 0, 0)

    def test_fused_matmul_relu_saves_a_launch_and_memory(self):
        b = GraphBuilder()
        x, w = b.input((2, 3)), b.input((3, 4))
        b.output(b.add(OpKind.FUSED_MATMUL_RELU, (x, w)))
        fused = graph_cost(b.build())
        assert (fused.flops, fused.mem_accesses, fused.kernel_launches) == (56, 26, 1)

    def test_fused_add_n(self):
        b = GraphBuilder()
        xs = [b.input((2, 3)) for _ in range(3)]
        b.output(b.add(OpKind.FUSED_ADD_N, xs))
        cost = graph_cost(b.build())
        assert (cost.flops, cost.mem_accesses, cost.kernel_launches) == (12, 24, 1)

    def test_conv_counts(self):
        b = GraphBuilder()
        x, w = b.input((1, 2, 4, 4)), b.input((3, 2, 3, 3))
        b.output(b.conv2d(x, w, padding=1))
        cost = graph_cost(b.build())
        out = 1 * 3 * 4 * 4
        assert cost.flops == 2 * out * 2 * 3 * 3
        assert cost.mem_accesses == 32 + 54 + out
        assert cost.kernel_launches == 1

    def test_layout_ops_move_memory_only(self):
        b = GraphBuilder()
        b.output(b.transpose(b.input((2, 5)), (1, 0)))
        cost = graph_cost(b.build())
        assert (cost.flops, cost.mem_accesses) == (0, 20)


class TestRuntimeEstimate:
    """Weighted runtime"""

    def test_default_weights(self, matmul_relu_graph):
        expected = 1e-9 * 56 + 5e-9 * 42 + 5e-3 * 2
        assert graph_cost(matmul_relu_graph).runtime_est == pytest.approx(expected, rel=1e-12)

    def test_custom_weights(self, matmul_relu_graph):
        weights = CostWeights(1.0, 0.0, 0.0)
        assert graph_cost(matmul_relu_graph, weights).runtime_est == 56.0

    def test_breakdown_arithmetic(self):
        a = CostBreakdown(1, 2, 3)
        total = a + a.scaled(2)
        assert (total.flops, total.mem_accesses, total.kernel_launches) == (3, 6, 9)
        assert total.as_dict()["launches"] == 9

    def test_cost_is_deterministic(self, bert_graph):
        assert graph_cost(bert_graph) == graph_cost(bert_graph)


class TestMetricCorrelation:
    """Pearson correlation of per-step telemetry"""

    def test_perfectly_correlated_columns(self):
        records = [{"runtime": r, "flops": 2 * r, "mem": 3 * r + 1, "launches": 5 - r} for r in range(5)]
        corr = metric_correlation(records)
        assert corr.loc["runtime", "mem"] == pytest.approx(1.0)
        assert corr.loc["runtime", "launches"] == pytest.approx(-1.0)

    def test_too_few_records(self):
        corr = metric_correlation([{"runtime": 1.0, "flops": 1, "mem": 1, "launches": 1}])
        assert corr.isna().all().all()
