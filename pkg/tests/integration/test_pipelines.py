"""
Integration tests for the orchestrated pipelines, run end to end at a tiny scale
"""

import json

import numpy as np
import pytest

from graphdream.agents.orchestrator import PipelineOrchestrator, PipelineType
from graphdream.config.settings import load_config
from graphdream.exceptions import CheckpointError
from graphdream.graph.interpreter import equivalent
from graphdream.graph.serialization import load_graph
from graphdream.rules.library import DEFAULT_LIBRARY
from graphdream.utils.analytics import read_csv
from graphdream.zoo.builders import build_by_name

pytestmark = pytest.mark.integration

GRAPH = "mlp_toy"

ADD_TO_MUL = {
    "name": "add_to_mul",
    "variables": {"a": {}, "b": {"same_as": "a"}},
    "source": {"nodes": [{"name": "s", "kind": "Add", "inputs": ["a", "b"]}], "output": "s"},
    "target": {"nodes": [{"name": "p", "kind": "Mul", "inputs": ["a", "b"]}], "output": "p"},
}


@pytest.fixture
def bad_library(tmp_path):
    document = json.loads(DEFAULT_LIBRARY.read_text())
    document["rules"].append(ADD_TO_MUL)
    path = tmp_path / "bad_rules.json"
    path.write_text(json.dumps(document))
    return path


class TestRulePipeline:
    """verify-rules"""

    def test_shipped_library_verifies(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.VERIFY_RULES)
        assert result.success
        assert result.summary["failed"] == []
        assert result.summary["pruned"] == ["add_commute"]
        report = read_csv(result.artifacts["report"])
        assert len(report) == result.summary["rules"]
        assert (tmp_path / "verified_rules.json").exists()
        assert (tmp_path / "config.json").exists()
        assert (tmp_path / "metrics.prom").exists()

    def test_wrong_rule_is_reported(self, tiny_config, tmp_path, bad_library):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.VERIFY_RULES, library=bad_library)
        assert not result.success
        assert result.summary["failed"] == ["add_to_mul"]
        assert "add_to_mul" not in (tmp_path / "verified_rules.json").read_text()

    def test_zero_trials_rejected(self, tiny_config, tmp_path):
        with pytest.raises(ValueError):
            PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.VERIFY_RULES, trials=0)
        assert (tmp_path / "metrics.prom").exists()


class TestModelPipelines:
    """train-wm, train-controller and RL optimize"""

    def test_world_model_then_controller_then_optimize(self, tiny_config, tmp_path):
        wm_dir, ctrl_dir, opt_dir = tmp_path / "wm", tmp_path / "ctrl", tmp_path / "opt"

        wm = PipelineOrchestrator(tiny_config, wm_dir).execute(PipelineType.TRAIN_WM, graph=GRAPH)
        assert wm.success
        assert len(read_csv(wm_dir / "wm_loss.csv")) == tiny_config.wm.epochs
        assert wm.summary["real_interactions"] > 0
        assert np.isfinite(wm.summary["model_error"])
        assert np.isfinite(wm.summary["persistence_error"])

        ctrl = PipelineOrchestrator(tiny_config, ctrl_dir).execute(
            PipelineType.TRAIN_CONTROLLER, graph=GRAPH, wm_path=wm_dir / "world_model.pt", tau=1.0)
        assert ctrl.summary["real_steps_during_training"] == 0
        assert ctrl.summary["dream_steps"] > 0
        assert ctrl.summary["tau"] == 1.0
        assert "world_model" not in ctrl.artifacts
        assert len(read_csv(ctrl_dir / "controller_reward.csv")) == tiny_config.controller.epochs

        opt = PipelineOrchestrator(tiny_config, opt_dir).execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="rl",
            wm_path=wm_dir / "world_model.pt", controller_path=ctrl_dir / "controller.pt")
        assert opt.success
        assert opt.summary["equivalent"]
        assert opt.summary["controller_tau"] == 1.0
        assert opt.summary["episodes"] == tiny_config.controller.eval_episodes
        assert len(read_csv(opt_dir / "eval_episodes.csv")) == tiny_config.controller.eval_episodes

    def test_controller_trains_its_own_world_model(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.TRAIN_CONTROLLER, graph=GRAPH)
        assert result.artifacts["world_model"].exists()
        assert result.summary["tau"] == tiny_config.controller.tau

    def test_checkpoint_for_other_graph_rejected(self, tiny_config, tmp_path):
        PipelineOrchestrator(tiny_config, tmp_path / "wm").execute(PipelineType.TRAIN_WM, graph=GRAPH)
        exported = PipelineOrchestrator(tiny_config, tmp_path / "g").execute(PipelineType.EXPORT_GRAPH, graph=GRAPH)
        with pytest.raises(CheckpointError):
            PipelineOrchestrator(tiny_config, tmp_path / "opt").execute(
                PipelineType.OPTIMIZE, graph=str(exported.artifacts["graph"]), method="rl",
                wm_path=tmp_path / "wm" / "world_model.pt")

    def test_controller_for_other_graph_rejected(self, tiny_config, tmp_path):
        exported = PipelineOrchestrator(tiny_config, tmp_path / "g").execute(PipelineType.EXPORT_GRAPH, graph=GRAPH)
        PipelineOrchestrator(tiny_config, tmp_path / "ctrl").execute(
            PipelineType.TRAIN_CONTROLLER, graph=str(exported.artifacts["graph"]))
        PipelineOrchestrator(tiny_config, tmp_path / "wm").execute(PipelineType.TRAIN_WM, graph=GRAPH)
        with pytest.raises(CheckpointError, match="controller expects"):
            PipelineOrchestrator(tiny_config, tmp_path / "opt").execute(
                PipelineType.OPTIMIZE, graph=GRAPH, method="rl",
                wm_path=tmp_path / "wm" / "world_model.pt", controller_path=tmp_path / "ctrl" / "controller.pt")

    def test_controller_runs_with_world_model_saved_beside_it(self, tiny_config, tmp_path):
        PipelineOrchestrator(tiny_config, tmp_path / "ctrl").execute(PipelineType.TRAIN_CONTROLLER, graph=GRAPH)
        result = PipelineOrchestrator(tiny_config, tmp_path / "opt").execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="rl", controller_path=tmp_path / "ctrl" / "controller.pt")
        assert result.success
        assert result.summary["controller_tau"] == tiny_config.controller.tau
        assert result.summary["real_interactions"] > 0

    def test_controller_without_its_world_model_rejected(self, tiny_config, tmp_path):
        PipelineOrchestrator(tiny_config, tmp_path / "wm").execute(PipelineType.TRAIN_WM, graph=GRAPH)
        PipelineOrchestrator(tiny_config, tmp_path / "ctrl").execute(
            PipelineType.TRAIN_CONTROLLER, graph=GRAPH, wm_path=tmp_path / "wm" / "world_model.pt")
        with pytest.raises(CheckpointError, match="no world model"):
            PipelineOrchestrator(tiny_config, tmp_path / "opt").execute(
                PipelineType.OPTIMIZE, graph=GRAPH, method="rl", controller_path=tmp_path / "ctrl" / "controller.pt")


class TestSearchPipelines:
    """optimize with the search baselines"""

    def test_greedy_and_backtracking(self, tiny_config, tmp_path):
        greedy = PipelineOrchestrator(tiny_config, tmp_path / "g").execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="greedy")
        back = PipelineOrchestrator(tiny_config, tmp_path / "b").execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="backtracking")
        assert greedy.success and back.success
        assert greedy.summary["final_cost_mean"] < greedy.summary["initial_cost"]
        assert back.summary["best_final_cost"] <= greedy.summary["best_final_cost"] + 1e-15
        assert greedy.summary["real_interactions"] == 0
        assert greedy.summary["mem_reduction_pct_mean"] >= 0
        assert greedy.summary["optimization_seconds"] > 0
        assert (tmp_path / "g" / "eval_timing.csv").exists()

    def test_optimized_graph_file(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="greedy")
        optimized = load_graph(result.artifacts["graph"])
        assert equivalent(build_by_name(GRAPH), optimized, 3, np.random.default_rng(0))

    def test_exported_graph_round_trips_through_optimize(self, tiny_config, tmp_path):
        exported = PipelineOrchestrator(tiny_config, tmp_path / "g").execute(PipelineType.EXPORT_GRAPH, graph=GRAPH)
        assert exported.artifacts["graph"].name == f"{GRAPH}.json"
        result = PipelineOrchestrator(tiny_config, tmp_path / "opt").execute(
            PipelineType.OPTIMIZE, graph=str(exported.artifacts["graph"]), method="greedy")
        assert result.success
        assert result.summary["graph"] == GRAPH

    def test_random_baseline(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(
            PipelineType.OPTIMIZE, graph=GRAPH, method="random", episodes=3)
        assert result.summary["episodes"] == 3
        assert result.summary["real_interactions"] > 0

    def test_missing_graph_file(self, tiny_config, tmp_path):
        with pytest.raises(FileNotFoundError):
            PipelineOrchestrator(tiny_config, tmp_path).execute(
                PipelineType.OPTIMIZE, graph=str(tmp_path / "absent.json"), method="greedy")


class TestExperimentPipelines:
    """Sweeps, benchmarks and the comparison tables"""

    def test_temperature_sweep(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.SWEEP_TEMPERATURE, graph=GRAPH)
        sweep = read_csv(tmp_path / "temperature_sweep.csv")
        assert list(sweep["tau"]) == tiny_config.sweep.taus
        assert result.summary["best_tau"] in tiny_config.sweep.taus

    def test_step_time_benchmark(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.BENCH_STEP_TIME, graph=GRAPH)
        timing = read_csv(tmp_path / "step_time.csv")
        assert list(timing["kind"]) == ["real", "dream"]
        assert (timing["steps"] == tiny_config.sweep.bench_steps).all()
        assert result.summary["real_over_dream"] > 0

    def test_reward_comparison(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(
            PipelineType.COMPARE_REWARDS, graph=GRAPH, presets=["incremental", "combined_tuned"], epochs=1)
        traces = read_csv(tmp_path / "reward_comparison.csv")
        assert sorted(set(traces["preset"])) == ["combined_tuned", "incremental"]
        assert traces["min_max_normalized"].between(0.0, 1.0).all()
        rt0 = PipelineOrchestrator(tiny_config, tmp_path / "env").make_env(GRAPH).rt0
        assert np.allclose(traces["mean_reward_norm"], traces["mean_reward"] / rt0, rtol=1e-8)
        assert (tmp_path / "metric_correlation.csv").exists()
        assert set(result.summary["final_reduction_pct"]) == {"incremental", "combined_tuned"}

    def test_xfer_heatmap(self, tiny_config, tmp_path):
        orchestrator = PipelineOrchestrator(tiny_config, tmp_path)
        result = orchestrator.execute(PipelineType.XFER_HEATMAP, method="greedy", graphs=["mlp_toy", "bert_toy"])
        heatmap = read_csv(tmp_path / "xfer_heatmap.csv")
        assert len(heatmap) == 2 * len(orchestrator.rules) == result.summary["rows"]
        assert heatmap[heatmap["graph"] == "mlp_toy"]["count"].sum() > 0

    def test_sample_efficiency(self, tiny_config, tmp_path):
        result = PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.SAMPLE_EFFICIENCY, graph=GRAPH)
        table = read_csv(tmp_path / "sample_efficiency.csv")
        assert list(table["pipeline"]) == ["model_based", "model_free"]
        assert result.summary["model_based"]["real_interactions"] > 0


class TestDeterminism:
    """Same seed, same bytes"""

    @pytest.mark.parametrize("pipeline, kwargs, artifact", [
        (PipelineType.TRAIN_WM, {"graph": GRAPH}, "wm_loss.csv"),
        (PipelineType.OPTIMIZE, {"graph": GRAPH, "method": "random", "episodes": 3}, "eval_episodes.csv"),
        (PipelineType.OPTIMIZE, {"graph": GRAPH, "method": "backtracking"}, "eval_episodes.csv"),
    ])
    def test_repeat_runs_are_byte_identical(self, tiny_config, tmp_path, pipeline, kwargs, artifact):
        for run in ("a", "b"):
            PipelineOrchestrator(tiny_config, tmp_path / run).execute(pipeline, **kwargs)
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()

    def test_config_snapshot_reloads(self, tiny_config, tmp_path):
        PipelineOrchestrator(tiny_config, tmp_path).execute(PipelineType.EXPORT_GRAPH, graph=GRAPH)
        assert load_config(tmp_path / "config.json") == tiny_config
