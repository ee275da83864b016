"""
Base Agent Class for graph optimization methods
"""

import json
import time
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from graphdream.env.environment import GraphOptEnv
from graphdream.graph.hashing import canonical_hash
from graphdream.graph.ir import ComputationGraph
from graphdream.utils.analytics import reduction_pct, summarize, write_csv
from graphdream.utils.logging import get_logger, log_search_result


class AgentType(Enum):
    """Enumeration of optimization methods"""
    RL = "rl"
    GREEDY = "greedy"
    BACKTRACKING = "backtracking"
    RANDOM = "random"
    MODEL_FREE = "model_free"


@dataclass
class EpisodeResult:
    """One optimization run on one graph"""
    method: str
    graph_name: str
    initial_cost: float
    final_cost: float
    final_graph: ComputationGraph
    applied: List[str] = field(default_factory=list)
    episode_return: float = 0.0
    real_interactions: int = 0
    initial_mem: float = 0.0
    final_mem: float = 0.0
    seconds: float = 0.0  # wall clock, filled in by BaseAgent.optimize

    @property
    def reduction_pct(self) -> float:
        return reduction_pct(self.initial_cost, self.final_cost)

    @property
    def mem_reduction_pct(self) -> float:
        return reduction_pct(self.initial_mem, self.final_mem)

    @property
    def steps(self) -> int:
        return len(self.applied)


REPORT_EPISODE_COLUMNS = ["episode", "initial_cost", "final_cost", "reduction_pct", "mem_reduction_pct",
                          "steps", "episode_return", "graph_hash"]
# wall-clock times vary run to run, so they stay out of the episode table
TIMING_COLUMNS = ["episode", "optimization_seconds"]
HISTOGRAM_COLUMNS = ["rule", "count"]


@dataclass
class EvalReport:
    """
    Aggregate over evaluation episodes; identical schema for every method so the
    RL and search reports line up in one table.
    """
    method: str
    graph: str
    episodes: int
    initial_cost: float
    final_cost_mean: float
    final_cost_std: float
    final_cost_ci95: float
    reduction_pct_mean: float
    reduction_pct_std: float
    reduction_pct_ci95: float
    mem_reduction_pct_mean: float
    mem_reduction_pct_std: float
    best_final_cost: float
    best_graph_hash: str
    real_interactions: int
    optimization_seconds: float = 0.0
    seconds: List[float] = field(default_factory=list)
    histogram: Dict[str, int] = field(default_factory=dict)
    episode_rows: List[Dict[str, Any]] = field(default_factory=list)
    best_graph: Optional[ComputationGraph] = None

    @classmethod
    def from_results(cls, results: List[EpisodeResult], real_interactions: Optional[int] = None) -> "EvalReport":
        if not results:
            raise ValueError("cannot build a report from zero episodes")
        final = summarize(r.final_cost for r in results)
        reduction = summarize(r.reduction_pct for r in results)
        mem_reduction = summarize(r.mem_reduction_pct for r in results)
        best = min(results, key=lambda r: r.final_cost)
        histogram = Counter(name for r in results for name in r.applied)
        rows = [
            {
                "episode": i,
                "initial_cost": r.initial_cost,
                "final_cost": r.final_cost,
                "reduction_pct": r.reduction_pct,
                "mem_reduction_pct": r.mem_reduction_pct,
                "steps": r.steps,
                "episode_return": r.episode_return,
                "graph_hash": f"{canonical_hash(r.final_graph):016x}",
            }
            for i, r in enumerate(results)
        ]
        return cls(
            method=results[0].method,
            graph=results[0].graph_name,
            episodes=len(results),
            initial_cost=results[0].initial_cost,
            final_cost_mean=final.mean,
            final_cost_std=final.std,
            final_cost_ci95=final.ci95,
            reduction_pct_mean=reduction.mean,
            reduction_pct_std=reduction.std,
            reduction_pct_ci95=reduction.ci95,
            mem_reduction_pct_mean=mem_reduction.mean,
            mem_reduction_pct_std=mem_reduction.std,
            best_final_cost=best.final_cost,
            best_graph_hash=f"{canonical_hash(best.final_graph):016x}",
            real_interactions=(real_interactions if real_interactions is not None
                               else sum(r.real_interactions for r in results)),
            optimization_seconds=float(np.mean([r.seconds for r in results])),
            seconds=[r.seconds for r in results],
            histogram=dict(sorted(histogram.items())),
            episode_rows=rows,
            best_graph=best.final_graph,
        )

    def as_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "graph": self.graph,
            "episodes": self.episodes,
            "initial_cost": self.initial_cost,
            "final_cost_mean": self.final_cost_mean,
            "final_cost_std": self.final_cost_std,
            "final_cost_ci95": self.final_cost_ci95,
            "reduction_pct_mean": self.reduction_pct_mean,
            "reduction_pct_std": self.reduction_pct_std,
            "reduction_pct_ci95": self.reduction_pct_ci95,
            "mem_reduction_pct_mean": self.mem_reduction_pct_mean,
            "mem_reduction_pct_std": self.mem_reduction_pct_std,
            "best_final_cost": self.best_final_cost,
            "best_graph_hash": self.best_graph_hash,
            "real_interactions": self.real_interactions,
            "optimization_seconds": self.optimization_seconds,
            "histogram": dict(self.histogram),
        }

    def histogram_rows(self) -> List[Dict[str, Any]]:
        return [{"rule": rule, "count": count} for rule, count in self.histogram.items()]

    def timing_rows(self) -> List[Dict[str, Any]]:
        return [{"episode": i, "optimization_seconds": s} for i, s in enumerate(self.seconds)]

    def write(self, out_dir: Path, prefix: str = "eval") -> Dict[str, Path]:
        """report JSON, per-episode CSV, rule histogram CSV and per-episode timing CSV"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / f"{prefix}_report.json"
        report_path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        return {
            "report": report_path,
            "episodes": write_csv(self.episode_rows, out_dir / f"{prefix}_episodes.csv", REPORT_EPISODE_COLUMNS),
            "histogram": write_csv(self.histogram_rows(), out_dir / f"{prefix}_histogram.csv", HISTOGRAM_COLUMNS),
            "timing": write_csv(self.timing_rows(), out_dir / f"{prefix}_timing.csv", TIMING_COLUMNS),
        }


class BaseAgent(ABC):
    """
    Base class for every optimization method: one run takes the real environment's
    graph and returns an EpisodeResult.
    """

    def __init__(self, agent_type: AgentType, config: Optional[Dict[str, Any]] = None):
        self.agent_type = agent_type
        self.config = config or {}
        self.logger = get_logger(f"agent.{agent_type.value}")

        # Performance metrics
        self.run_count = 0
        self.run_times: List[float] = []
        self.error_count = 0

    @abstractmethod
    def run_episode(self, env: GraphOptEnv, rng: np.random.Generator) -> EpisodeResult:
        """Optimize env's graph once"""

    def optimize(self, env: GraphOptEnv, rng: np.random.Generator) -> EpisodeResult:
        """Run one episode with timing and logging"""
        start = time.perf_counter()
        self.run_count += 1
        try:
            result = self.run_episode(env, rng)
        except Exception as e:
            self.error_count += 1
            self.logger.error("optimization_failed", graph=env.name, error=str(e))
            raise
        result.seconds = time.perf_counter() - start
        self.run_times.append(result.seconds)
        log_search_result(self.agent_type.value, env.name, result.initial_cost, result.final_cost,
                          result.steps, reduction_pct=result.reduction_pct)
        return result

    def evaluate(self, env: GraphOptEnv, episodes: int, rng: np.random.Generator) -> EvalReport:
        """Run `episodes` optimizations and aggregate them"""
        start_steps = env.real_steps
        results = [self.optimize(env, rng) for _ in range(episodes)]
        return EvalReport.from_results(results, real_interactions=env.real_steps - start_steps)

    def get_metrics(self) -> Dict[str, Any]:
        """Get agent performance metrics"""
        avg_time = sum(self.run_times) / len(self.run_times) if self.run_times else 0.0
        return {
            "agent_type": self.agent_type.value,
            "run_count": self.run_count,
            "error_count": self.error_count,
            "success_rate": (self.run_count - self.error_count) / self.run_count if self.run_count else 0.0,
            "average_run_time": avg_time,
        }

    def __str__(self):
        return f"{self.agent_type.value}_agent"

    def __repr__(self):
        return f"<{self.__class__.__name__}(type={self.agent_type.value})>"


def run_env_episode(env: GraphOptEnv, policy, method: str) -> EpisodeResult:
    """
    Drive one real episode with `policy(state) -> Action` and collect the result
    """
    start_steps = env.real_steps
    state = env.reset()
    initial = env.current_cost()
    applied: List[str] = []
    total = 0.0
    terminal = False
    while not terminal:
        action = policy(state)
        result = env.step(action)
        total += result.reward
        if result.extra_info["valid"] and not result.extra_info["noop"]:
            applied.append(result.extra_info["rule"])
        state, terminal = result.next_state, result.terminal
    return EpisodeResult(
        method=method,
        graph_name=env.name,
        initial_cost=initial.runtime_est,
        final_cost=env.current_cost().runtime_est,
        final_graph=env.graph,
        applied=applied,
        episode_return=total,
        real_interactions=env.real_steps - start_steps,
        initial_mem=float(initial.mem_accesses),
        final_mem=float(env.current_cost().mem_accesses),
    )
