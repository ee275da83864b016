"""
Pipeline Orchestrator - Coordinates environment, world model, controller and baselines
for every command
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from graphdream.agents.base_agent import AgentType, BaseAgent, EvalReport
from graphdream.agents.controller_agent import (
    REWARD_TRACE_COLUMNS,
    Controller,
    ControllerAgent,
    train_in_dream,
    train_model_free,
)
from graphdream.agents.random_agent import RandomAgent
from graphdream.agents.search_agent import SearchAgent, SearchConfig
from graphdream.config.settings import RunConfig
from graphdream.cost.model import CostWeights, metric_correlation
from graphdream.env.environment import GraphOptEnv
from graphdream.env.rewards import REWARD_PRESETS
from graphdream.exceptions import CheckpointError
from graphdream.graph.interpreter import equivalent
from graphdream.graph.ir import ComputationGraph
from graphdream.graph.serialization import load_graph, save_graph
from graphdream.models.rollouts import collect_random_rollouts, uniform_valid_action
from graphdream.models.world_model import LOSS_COLUMNS, DreamEnv, WorldModel, evaluate_one_step, train_wm
from graphdream.monitoring.metrics import MetricsCollector
from graphdream.rules.library import prepare_rules, read_rules, save_library
from graphdream.rules.pattern import RewriteRule
from graphdream.rules.pruning import is_trivial
from graphdream.rules.verification import verify_rule
from graphdream.utils.analytics import summarize, write_csv
from graphdream.utils.logging import get_logger, log_command
from graphdream.utils.seeding import make_rng, make_torch_generator
from graphdream.zoo.builders import ZOO_NAMES, build_by_name

HELD_OUT_ROLLOUTS = 5
EQUIVALENCE_TRIALS = 10


class PipelineType(Enum):
    """Commands the orchestrator can run"""
    VERIFY_RULES = "verify-rules"
    TRAIN_WM = "train-wm"
    TRAIN_CONTROLLER = "train-controller"
    OPTIMIZE = "optimize"
    SWEEP_TEMPERATURE = "sweep-temperature"
    BENCH_STEP_TIME = "bench-step-time"
    EXPORT_GRAPH = "export-graph"
    COMPARE_REWARDS = "compare-rewards"
    XFER_HEATMAP = "xfer-heatmap"
    SAMPLE_EFFICIENCY = "sample-efficiency"


@dataclass
class PipelineResult:
    """Result of a pipeline execution"""
    pipeline: PipelineType
    success: bool
    artifacts: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)
    execution_time: float = 0.0


class PipelineOrchestrator:
    """
    Resolves graphs, rules and models from a RunConfig and runs one command's
    pipeline, writing artifacts, config.json and metrics.prom into out_dir.
    """

    def __init__(self, config: RunConfig, out_dir: Path, metrics: Optional[MetricsCollector] = None):
        self.config = config
        self.out_dir = Path(out_dir)
        self.metrics = metrics or MetricsCollector()
        self.logger = get_logger("orchestrator")
        self.weights = CostWeights.from_settings(config.cost)
        self._rules: Optional[List[RewriteRule]] = None

    # -- shared resources -------------------------------------------------------------

    def rng(self, name: str) -> np.random.Generator:
        return make_rng(self.config.seed, name)

    @property
    def rules(self) -> List[RewriteRule]:
        if self._rules is None:
            r = self.config.rules
            self._rules = prepare_rules(r.library, r.trials, self.rng("rules"), r.max_dim, r.rel_tol, r.abs_tol)
        return self._rules

    def resolve_graph(self, graph: str) -> Tuple[str, ComputationGraph, bool]:
        """(name, graph, is_zoo) for a zoo name or a graph file path"""
        if graph in ZOO_NAMES:
            return graph, build_by_name(graph), True
        path = Path(graph)
        return path.stem, load_graph(path), False

    def make_env(self, graph: str, config: Optional[RunConfig] = None, record_telemetry: bool = False) -> GraphOptEnv:
        config = config or self.config
        name, g, is_zoo = self.resolve_graph(graph)
        cap = config.env.zoo_location_cap if is_zoo else config.env.location_cap
        return GraphOptEnv(g, self.rules, config.env, self.weights, location_cap=cap, name=name, metrics=self.metrics,
                           record_telemetry=record_telemetry)

    def new_world_model(self, env: GraphOptEnv, name: str = "wm") -> WorldModel:
        return WorldModel.from_config(self.config, env.n_rules, env.location_cap,
                                      make_torch_generator(self.config.seed, name))

    def new_controller(self, wm: WorldModel, name: str = "controller") -> Controller:
        return Controller.for_world_model(wm, self.config.controller, make_torch_generator(self.config.seed, name))

    def _check_model(self, wm: WorldModel, env: GraphOptEnv):
        if wm.dims.n_rules != env.n_rules or wm.dims.location_cap != env.location_cap:
            raise CheckpointError(
                f"world model expects {wm.dims.n_rules} rules / {wm.dims.location_cap} locations, "
                f"environment has {env.n_rules} / {env.location_cap}")

    def _check_controller(self, controller: Controller, wm: WorldModel, env: GraphOptEnv):
        d = controller.dims
        expected = (wm.dims.latent_dim, wm.dims.hidden, env.n_rules, env.location_cap)
        found = (d.latent_dim, d.wm_hidden, d.n_rules, d.location_cap)
        if found != expected:
            raise CheckpointError(
                f"controller expects latent {found[0]} / hidden {found[1]} / {found[2]} rules / "
                f"{found[3]} locations, world model and environment give "
                f"{expected[0]} / {expected[1]} / {expected[2]} / {expected[3]}")

    def _paired_world_model(self, controller_path: Path, wm_path: Optional[Path]) -> Path:
        """The world model a controller checkpoint runs with: explicit, or saved beside it"""
        if wm_path is not None:
            return Path(wm_path)
        sibling = Path(controller_path).parent / "world_model.pt"
        if not sibling.exists():
            raise CheckpointError(f"no world model beside {controller_path}; pass the one it was trained with")
        return sibling

    def _fit_world_model(self, env: GraphOptEnv, rng_name: str = "wm") -> Tuple[WorldModel, Any]:
        wm = self.new_world_model(env, rng_name)
        result = train_wm(wm, env, self.config.wm.epochs, self.config.wm, self.rng(rng_name), self.metrics)
        return wm, result

    def _world_model(self, env: GraphOptEnv, wm_path: Optional[Path]) -> WorldModel:
        if wm_path is not None:
            wm = WorldModel.load(wm_path)
            self._check_model(wm, env)
            return wm
        wm, _ = self._fit_world_model(env)
        return wm

    def _dream_controller(self, wm: WorldModel, env: GraphOptEnv, tau: float, rng_name: str = "controller"):
        controller = self.new_controller(wm, rng_name)
        controller.meta["tau"] = tau
        result = train_in_dream(controller, wm, env, self.config.controller.epochs, self.config.controller,
                                tau, self.rng(rng_name), self.metrics)
        return controller, result

    # -- execution --------------------------------------------------------------------

    def execute(self, pipeline: PipelineType, **kwargs: Any) -> PipelineResult:
        """Run one pipeline with logging, config snapshot and metrics dump"""
        handlers: Dict[PipelineType, Callable[..., PipelineResult]] = {
            PipelineType.VERIFY_RULES: self.verify_rules,
            PipelineType.TRAIN_WM: self.train_world_model,
            PipelineType.TRAIN_CONTROLLER: self.train_controller,
            PipelineType.OPTIMIZE: self.optimize,
            PipelineType.SWEEP_TEMPERATURE: self.sweep_temperature,
            PipelineType.BENCH_STEP_TIME: self.bench_step_time,
            PipelineType.EXPORT_GRAPH: self.export_graph,
            PipelineType.COMPARE_REWARDS: self.compare_rewards,
            PipelineType.XFER_HEATMAP: self.xfer_heatmap,
            PipelineType.SAMPLE_EFFICIENCY: self.sample_efficiency,
        }
        start = time.perf_counter()
        log_command(pipeline.value, "started", seed=self.config.seed, out=str(self.out_dir))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config.write_snapshot(self.out_dir)
        try:
            result = handlers[pipeline](**kwargs)
        except Exception as e:
            log_command(pipeline.value, "failed", error=str(e), error_type=type(e).__name__)
            raise
        finally:
            self.metrics.write(self.out_dir)
        result.execution_time = time.perf_counter() - start
        log_command(pipeline.value, "finished", success=result.success, duration=result.execution_time)
        return result

    # -- pipelines ----------------------------------------------------------------------

    def verify_rules(self, library: Optional[Path] = None, trials: Optional[int] = None) -> PipelineResult:
        r = self.config.rules
        trials = r.trials if trials is None else trials
        if trials < 1:
            raise ValueError(f"trials must be >= 1, got {trials}")
        rng = self.rng("rules")
        checked = [verify_rule(rule, trials, rng, r.max_dim, r.rel_tol, r.abs_tol)
                   for rule in read_rules(library or r.library)]
        rows = [{"id": rule.id, "name": rule.name, "verified": rule.verified, "trials": rule.trials,
                 "trivial": rule.verified and is_trivial(rule)} for rule in checked]
        failed = [rule.name for rule in checked if not rule.verified]
        artifacts = {
            "report": write_csv(rows, self.out_dir / "rules_report.csv",
                                ["id", "name", "verified", "trials", "trivial"]),
            "library": save_library([rule for rule in checked if rule.verified], self.out_dir / "verified_rules.json"),
        }
        return PipelineResult(
            PipelineType.VERIFY_RULES, not failed, artifacts,
            {"rules": len(checked), "failed": failed, "pruned": [row["name"] for row in rows if row["trivial"]]},
            errors=[f"rule {name} failed verification" for name in failed],
        )

    def train_world_model(self, graph: str) -> PipelineResult:
        env = self.make_env(graph)
        wm, result = self._fit_world_model(env)
        held_out = collect_random_rollouts(env, HELD_OUT_ROLLOUTS, self.rng("wm_eval"))
        one_step = evaluate_one_step(wm, held_out)
        artifacts = {
            "checkpoint": wm.save(self.out_dir / "world_model.pt"),
            "loss": write_csv(result.trace, self.out_dir / "wm_loss.csv", LOSS_COLUMNS),
        }
        summary = {
            "graph": env.name,
            "epochs": len(result.trace),
            "initial_nll": result.trace[0]["nll"],
            "final_nll": result.trace[-1]["nll"],
            "real_interactions": result.real_interactions,
            **one_step,
        }
        return PipelineResult(PipelineType.TRAIN_WM, True, artifacts, summary)

    def train_controller(self, graph: str, wm_path: Optional[Path] = None, tau: Optional[float] = None) -> PipelineResult:
        env = self.make_env(graph)
        wm = self._world_model(env, wm_path)
        tau = self.config.controller.tau if tau is None else tau
        controller, result = self._dream_controller(wm, env, tau)
        artifacts = {
            "checkpoint": controller.save(self.out_dir / "controller.pt"),
            "rewards": write_csv(result.trace, self.out_dir / "controller_reward.csv", REWARD_TRACE_COLUMNS),
        }
        if wm_path is None:
            artifacts["world_model"] = wm.save(self.out_dir / "world_model.pt")
        summary = {
            "graph": env.name,
            "tau": tau,
            "epochs": len(result.trace),
            "dream_steps": result.dream_steps,
            "real_steps_during_training": result.real_steps_consumed,
        }
        return PipelineResult(PipelineType.TRAIN_CONTROLLER, True, artifacts, summary)

    def make_agent(self, method: str, env: GraphOptEnv, wm_path: Optional[Path] = None,
                   controller_path: Optional[Path] = None) -> BaseAgent:
        agent_type = AgentType(method)
        if agent_type in (AgentType.GREEDY, AgentType.BACKTRACKING):
            return SearchAgent(agent_type, SearchConfig.from_settings(self.config.search))
        if agent_type == AgentType.RANDOM:
            return RandomAgent()
        if agent_type == AgentType.RL:
            if controller_path is not None:
                wm = self._world_model(env, self._paired_world_model(controller_path, wm_path))
                controller = Controller.load(controller_path)
                self._check_controller(controller, wm, env)
            else:
                wm = self._world_model(env, wm_path)
                controller, _ = self._dream_controller(wm, env, self.config.controller.tau)
            return ControllerAgent(controller, wm, greedy=self.config.controller.greedy_eval)
        raise ValueError(f"unsupported method {method!r}")

    def _evaluate(self, agent: BaseAgent, env: GraphOptEnv, episodes: int) -> EvalReport:
        return agent.evaluate(env, episodes, self.rng(f"eval:{agent.agent_type.value}"))

    def optimize(self, graph: str, method: str, wm_path: Optional[Path] = None,
                 controller_path: Optional[Path] = None, episodes: Optional[int] = None) -> PipelineResult:
        env = self.make_env(graph)
        agent = self.make_agent(method, env, wm_path, controller_path)
        episodes = episodes or (1 if isinstance(agent, SearchAgent) else self.config.controller.eval_episodes)
        report = self._evaluate(agent, env, episodes)
        artifacts = report.write(self.out_dir)
        artifacts["graph"] = save_graph(report.best_graph, self.out_dir / "optimized_graph.json", f"{env.name}_optimized")
        same = equivalent(env.initial_graph, report.best_graph, EQUIVALENCE_TRIALS, self.rng("equivalence"))
        errors = [] if same else [f"optimized {env.name} is not equivalent to its input"]
        summary = {**report.as_dict(), "equivalent": same}
        if isinstance(agent, ControllerAgent):
            summary["controller_tau"] = agent.controller.tau
        return PipelineResult(PipelineType.OPTIMIZE, same, artifacts, summary, errors)

    def sweep_temperature(self, graph: str, taus: Optional[Sequence[float]] = None,
                          wm_path: Optional[Path] = None) -> PipelineResult:
        env = self.make_env(graph)
        wm = self._world_model(env, wm_path)
        taus = list(taus or self.config.sweep.taus)
        rows = []
        for tau in taus:
            wm_scores, real_scores = [], []
            for run in range(self.config.sweep.runs):
                name = f"sweep:{tau}:{run}"
                controller, result = self._dream_controller(wm, env, tau, name)
                wm_scores.append(result.trace[-1]["mean_reward"])
                agent = ControllerAgent(controller, wm, greedy=self.config.controller.greedy_eval)
                report = agent.evaluate(env, self.config.controller.eval_episodes, self.rng(f"{name}:eval"))
                real_scores.append(report.reduction_pct_mean)
            wm_summary, real_summary = summarize(wm_scores), summarize(real_scores)
            rows.append({"tau": tau, "wm_score_mean": wm_summary.mean, "wm_score_std": wm_summary.std,
                         "real_score_mean": real_summary.mean, "real_score_std": real_summary.std,
                         "runs": self.config.sweep.runs})
        artifacts = {"sweep": write_csv(rows, self.out_dir / "temperature_sweep.csv")}
        best = max(rows, key=lambda row: row["real_score_mean"])
        return PipelineResult(PipelineType.SWEEP_TEMPERATURE, True, artifacts,
                              {"graph": env.name, "taus": taus, "best_tau": best["tau"]})

    def bench_step_time(self, graph: str, wm_path: Optional[Path] = None,
                        steps: Optional[int] = None) -> PipelineResult:
        """Mean wall time of real and dream steps under the random agent"""
        env = self.make_env(graph)
        wm = WorldModel.load(wm_path) if wm_path is not None else self.new_world_model(env)
        self._check_model(wm, env)
        steps = steps or self.config.sweep.bench_steps
        rng = self.rng("bench")

        start = time.perf_counter()
        done = True
        for _ in range(steps):
            if done:
                env.reset()
            done = env.step(uniform_valid_action(env, rng)).terminal
        real_total = time.perf_counter() - start

        dream = DreamEnv.from_real(wm, env, self.config.controller.tau, rng, self.metrics)
        start = time.perf_counter()
        state, done = None, True
        for _ in range(steps):
            if done:
                state = dream.reset()
            xfer_ids = np.flatnonzero(state.xfer_mask[:-1])
            if len(xfer_ids):
                xfer = int(rng.choice(xfer_ids))
                action = (xfer, int(rng.choice(np.flatnonzero(state.location_masks[xfer]))))
            else:
                action = (wm.dims.n_rules, 0)
            result = dream.step(action)
            state, done = result.next_state, result.terminal
        dream_total = time.perf_counter() - start

        rows = [
            {"kind": "real", "steps": steps, "mean_seconds": real_total / steps, "total_seconds": real_total},
            {"kind": "dream", "steps": steps, "mean_seconds": dream_total / steps, "total_seconds": dream_total},
        ]
        artifacts = {"timing": write_csv(rows, self.out_dir / "step_time.csv")}
        ratio = (real_total / dream_total) if dream_total > 0 else float("inf")
        return PipelineResult(PipelineType.BENCH_STEP_TIME, True, artifacts,
                              {"graph": env.name, "steps": steps, "real_over_dream": ratio})

    def export_graph(self, graph: str, path: Optional[Path] = None) -> PipelineResult:
        name, g, _ = self.resolve_graph(graph)
        target = path or self.out_dir / f"{name}.json"
        return PipelineResult(PipelineType.EXPORT_GRAPH, True, {"graph": save_graph(g, target, name)},
                              {"graph": name, "nodes": len(g.nodes)})

    def compare_rewards(self, graph: str, presets: Optional[Sequence[str]] = None,
                        epochs: Optional[int] = None) -> PipelineResult:
        """Model-free PPO under each reward preset, with normalized reward traces"""
        presets = list(presets or REWARD_PRESETS)
        epochs = epochs or self.config.controller.epochs
        rows, telemetry, finals = [], [], {}
        for name in presets:
            config = self.config.model_copy(update={"env": self.config.env.model_copy(
                update=REWARD_PRESETS[name].as_overrides()["env"])})
            env = self.make_env(graph, config, record_telemetry=True)
            wm = self.new_world_model(env, f"rewards:{name}:wm")
            controller = self.new_controller(wm, f"rewards:{name}")
            result = train_model_free(controller, wm, env, epochs, self.config.controller,
                                      self.rng(f"rewards:{name}"), metrics=self.metrics)
            rows.extend({"preset": name, **row} for row in result.trace)
            finals[name] = result.trace[-1]["mean_reduction_pct"]
            telemetry.extend(env.telemetry)
            env.close()
        correlation = metric_correlation(telemetry)
        correlation_path = self.out_dir / "metric_correlation.csv"
        correlation.to_csv(correlation_path, float_format="%.10g", lineterminator="\n")
        artifacts = {
            "traces": write_csv(rows, self.out_dir / "reward_comparison.csv",
                                ["preset", "epoch", "mean_reward", "mean_reward_norm", "min_max_normalized",
                                 "mean_reduction_pct", "real_interactions"]),
            "correlation": correlation_path,
        }
        return PipelineResult(PipelineType.COMPARE_REWARDS, True, artifacts,
                              {"graph": graph, "final_reduction_pct": finals})

    def xfer_heatmap(self, method: str, graphs: Optional[Sequence[str]] = None) -> PipelineResult:
        """Per-graph x per-rule application counts of one method over the zoo"""
        rows = []
        for graph in graphs or ZOO_NAMES:
            env = self.make_env(graph)
            agent = self.make_agent(method, env)
            report = self._evaluate(agent, env, 1 if isinstance(agent, SearchAgent) else self.config.controller.eval_episodes)
            for rule in env.rules:
                rows.append({"graph": env.name, "rule": rule.name, "count": report.histogram.get(rule.name, 0)})
        artifacts = {"heatmap": write_csv(rows, self.out_dir / "xfer_heatmap.csv", ["graph", "rule", "count"])}
        return PipelineResult(PipelineType.XFER_HEATMAP, True, artifacts, {"method": method, "rows": len(rows)})

    def sample_efficiency(self, graph: str) -> PipelineResult:
        """
        Real interactions of the model-based pipeline (world-model data only) against a
        model-free PPO run trained until it matches the model-based reduction
        """
        env = self.make_env(graph)
        wm, wm_result = self._fit_world_model(env)
        controller, _ = self._dream_controller(wm, env, self.config.controller.tau)
        eval_env = self.make_env(graph)
        report = ControllerAgent(controller, wm, self.config.controller.greedy_eval).evaluate(
            eval_env, self.config.controller.eval_episodes, self.rng("efficiency:eval"))
        target = report.reduction_pct_mean

        mf_env = self.make_env(graph)
        mf_wm = self.new_world_model(mf_env, "efficiency:mf_wm")
        mf_controller = self.new_controller(mf_wm, "efficiency:mf")
        settings = self.config.controller
        mf = train_model_free(mf_controller, mf_wm, mf_env, settings.model_free_epochs, settings,
                              self.rng("efficiency:mf"), target_reduction=target if target > 0 else None,
                              metrics=self.metrics)
        rows = [
            {"pipeline": "model_based", "real_interactions": wm_result.real_interactions,
             "reduction_pct": target, "reached_target": True},
            {"pipeline": "model_free", "real_interactions": mf.interactions_to_target or mf.real_steps_consumed,
             "reduction_pct": mf.trace[-1]["mean_reduction_pct"], "reached_target": mf.interactions_to_target is not None},
        ]
        artifacts = {"efficiency": write_csv(rows, self.out_dir / "sample_efficiency.csv")}
        return PipelineResult(PipelineType.SAMPLE_EFFICIENCY, True, artifacts,
                              {"graph": env.name, "model_based": rows[0], "model_free": rows[1]})
