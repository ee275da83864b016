"""
Desk-scale acceptance runs and step-time benchmarks

These train full-size models and take minutes each; select them with
`pytest -m acceptance` or `pytest -m performance`.
"""

import numpy as np
import pytest

from graphdream.agents.orchestrator import PipelineOrchestrator, PipelineType
from graphdream.agents.search_agent import SearchConfig, backtracking_optimize, greedy_optimize
from graphdream.graph.interpreter import equivalent
from graphdream.utils.analytics import read_csv
from graphdream.zoo.builders import ZOO_NAMES, build_by_name

ADD_FUSION_RULES = {"fuse_add3_left", "fuse_add3_right", "fuse_addn_absorb"}


@pytest.mark.acceptance
@pytest.mark.slow
class TestDeskAcceptance:
    """Full pipelines on bert_toy with the desk configuration"""

    def test_world_model_learns(self, desk_config, tmp_path):
        result = PipelineOrchestrator(desk_config, tmp_path).execute(PipelineType.TRAIN_WM, graph="bert_toy")
        trace = read_csv(tmp_path / "wm_loss.csv")
        assert len(trace) == desk_config.wm.epochs
        assert np.isfinite(trace[["nll", "reward_mse", "terminal_bce", "mask_bce"]].to_numpy()).all()
        assert result.summary["final_nll"] < result.summary["initial_nll"]
        assert result.summary["model_error"] < result.summary["persistence_error"]

    def test_dream_trained_controller(self, desk_config, tmp_path):
        orchestrator = PipelineOrchestrator(desk_config, tmp_path / "rl")
        trained = orchestrator.execute(PipelineType.TRAIN_CONTROLLER, graph="bert_toy")
        assert trained.summary["real_steps_during_training"] == 0

        rl = PipelineOrchestrator(desk_config, tmp_path / "eval").execute(
            PipelineType.OPTIMIZE, graph="bert_toy", method="rl",
            wm_path=trained.artifacts["world_model"], controller_path=trained.artifacts["checkpoint"])
        greedy = PipelineOrchestrator(desk_config, tmp_path / "greedy").execute(
            PipelineType.OPTIMIZE, graph="bert_toy", method="greedy")

        assert rl.summary["episodes"] == 5
        assert rl.summary["reduction_pct_mean"] > 0
        assert rl.summary["reduction_pct_mean"] >= 0.9 * greedy.summary["reduction_pct_mean"]
        assert sum(rl.summary["histogram"].get(name, 0) for name in ADD_FUSION_RULES) >= 1

    def test_sample_efficiency(self, desk_config, tmp_path):
        result = PipelineOrchestrator(desk_config, tmp_path).execute(
            PipelineType.SAMPLE_EFFICIENCY, graph="bert_toy")
        model_based, model_free = result.summary["model_based"], result.summary["model_free"]
        assert model_based["real_interactions"] <= 0.5 * model_free["real_interactions"]


@pytest.mark.acceptance
class TestSearchAcceptance:
    """Search baselines on the default zoo"""

    @pytest.mark.parametrize("name", ZOO_NAMES)
    def test_backtracking_not_worse_and_equivalent(self, name, rules):
        graph = build_by_name(name)
        greedy = greedy_optimize(graph, rules)
        back = backtracking_optimize(graph, rules, SearchConfig(budget=greedy.expanded + 500, queue_cap=200))
        assert back.final_cost <= greedy.final_cost + 1e-15
        rng = np.random.default_rng(0)
        assert equivalent(graph, greedy.graph, 10, rng)
        assert equivalent(graph, back.graph, 10, rng)


@pytest.mark.performance
@pytest.mark.slow
class TestStepTime:
    """Dream steps against real environment steps"""

    @pytest.mark.parametrize("name", ["bert_toy", "inception_toy"])
    def test_dream_step_is_faster(self, quick_config, tmp_path, name):
        config = quick_config.model_copy(update={"sweep": quick_config.sweep.model_copy(update={"bench_steps": 200})})
        result = PipelineOrchestrator(config, tmp_path).execute(PipelineType.BENCH_STEP_TIME, graph=name)
        timing = read_csv(tmp_path / "step_time.csv").set_index("kind")
        assert timing.loc["dream", "mean_seconds"] < timing.loc["real", "mean_seconds"]
        assert result.summary["real_over_dream"] > 1.0
