"""
Graph Optimization Environment - Masked two-part rewrite actions over a computation graph
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from graphdream.config.settings import EnvSettings, RunConfig
from graphdream.cost.model import CostBreakdown, CostWeights, graph_cost
from graphdream.embed.gnn import GraphTuple, encode
from graphdream.env.base import Env
from graphdream.env.rewards import reward_combined, reward_incremental
from graphdream.exceptions import EpisodeFinished
from graphdream.graph.hashing import canonical_hash
from graphdream.graph.ir import ComputationGraph
from graphdream.graph.serialization import load_graph
from graphdream.monitoring.metrics import MetricsCollector, PerformanceMonitor
from graphdream.rules.library import prepare_rules
from graphdream.rules.masks import ActionMasks, compute_masks
from graphdream.rules.pattern import RewriteRule
from graphdream.rules.rewrite import apply
from graphdream.utils.logging import get_logger, log_episode

logger = get_logger(__name__)

CACHE_LIMIT = 4096


class Action(NamedTuple):
    """(xfer_id, location); xfer_id == N is NO-OP and ignores location"""
    xfer_id: int
    location: int = 0


class XferTuple(NamedTuple):
    rule_id: int
    name: str
    match_count: int


@dataclass(eq=False)
class EnvState:
    """Observation handed to agents; masks always describe `graph`"""
    graph_tuple: GraphTuple
    xfer_mask: np.ndarray  # (N,)
    location_masks: np.ndarray  # (N, L)
    step_index: int
    graph: ComputationGraph
    xfer_tuples: Tuple[XferTuple, ...] = ()

    @property
    def full_xfer_mask(self) -> np.ndarray:
        """(N+1,) mask with the always-valid NO-OP bit appended"""
        return np.append(self.xfer_mask, True)

    def same_as(self, other: "EnvState") -> bool:
        return (
            self.step_index == other.step_index
            and np.array_equal(self.xfer_mask, other.xfer_mask)
            and np.array_equal(self.location_masks, other.location_masks)
            and self.graph_tuple.equals(other.graph_tuple)
            and canonical_hash(self.graph) == canonical_hash(other.graph)
        )


@dataclass
class StepResult:
    next_state: EnvState
    reward: float
    terminal: bool
    extra_info: Dict[str, Any] = field(default_factory=dict)

    def __iter__(self):
        yield self.next_state
        yield self.reward
        yield self.terminal
        yield self.extra_info


def _exact_key(graph: ComputationGraph) -> Tuple:
    # locations hold node ids, so the cache must not merge relabeled graphs
    return (
        tuple((n.id, n.kind.value, n.inputs, tuple(sorted(n.attrs.items()))) for n in graph.nodes.values()),
        graph.outputs,
    )


@dataclass
class _Analysis:
    masks: ActionMasks
    graph_tuple: GraphTuple
    cost: CostBreakdown


class GraphOptEnv(Env):
    """
    Real environment: applies verified rewrite rules to a graph and rewards cost drops
    """

    def __init__(self, graph: ComputationGraph, rules: Sequence[RewriteRule], settings: EnvSettings,
                 weights: Optional[CostWeights] = None, location_cap: Optional[int] = None,
                 name: str = "graph", metrics: Optional[MetricsCollector] = None,
                 record_telemetry: bool = False):
        self.initial_graph = graph
        self.rules = list(rules)
        self.settings = settings
        self.weights = weights or CostWeights()
        self.location_cap = location_cap or settings.location_cap
        self.name = name
        self.metrics = metrics
        self.monitor = PerformanceMonitor(metrics)

        self.real_steps = 0
        self.episodes = 0
        self.record_telemetry = record_telemetry
        # per-step cost records, kept only while record_telemetry is set
        self.telemetry: List[Dict[str, Any]] = []

        self._cache: Dict[Tuple, _Analysis] = {}
        self._graph = graph
        self._step_index = 0
        self._done = True
        self._started = False
        self._episode_return = 0.0
        initial = self._analyze(graph)
        self.initial_cost = initial.cost
        self.rt0 = initial.cost.runtime_est
        self.m0 = float(initial.cost.mem_accesses)

    @classmethod
    def from_files(cls, graph_path: Path, library_path: Optional[Path], config: RunConfig,
                   rng: np.random.Generator, metrics: Optional[MetricsCollector] = None) -> "GraphOptEnv":
        graph = load_graph(graph_path)
        rules = prepare_rules(library_path, config.rules.trials, rng, config.rules.max_dim,
                              config.rules.rel_tol, config.rules.abs_tol)
        return cls(graph, rules, config.env, CostWeights.from_settings(config.cost),
                   name=Path(graph_path).stem, metrics=metrics)

    # -- spaces ------------------------------------------------------------------

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    @property
    def noop_id(self) -> int:
        return len(self.rules)

    @property
    def action_space(self) -> Dict[str, Any]:
        return {"xfer": self.n_rules + 1, "location": self.location_cap}

    @property
    def observation_space(self) -> Dict[str, Any]:
        return {"rules": self.n_rules, "location_cap": self.location_cap}

    @property
    def horizon(self) -> int:
        return self.settings.max_steps + 1

    @property
    def graph(self) -> ComputationGraph:
        return self._graph

    @property
    def done(self) -> bool:
        return self._done

    # -- core --------------------------------------------------------------------

    def _analyze(self, graph: ComputationGraph) -> _Analysis:
        key = _exact_key(graph)
        cached = self._cache.get(key)
        if cached is None:
            if len(self._cache) >= CACHE_LIMIT:
                self._cache.clear()
            cached = _Analysis(
                masks=compute_masks(graph, self.rules, self.location_cap),
                graph_tuple=encode(graph, 0, self.weights),
                cost=graph_cost(graph, self.weights),
            )
            self._cache[key] = cached
        return cached

    def _state(self) -> EnvState:
        analysis = self._analyze(self._graph)
        masks = analysis.masks
        return EnvState(
            graph_tuple=analysis.graph_tuple.with_step(self._step_index),
            xfer_mask=masks.xfer_mask.copy(),
            location_masks=masks.location_masks.copy(),
            step_index=self._step_index,
            graph=self._graph,
            xfer_tuples=tuple(
                XferTuple(rule.id, rule.name, count) for rule, count in zip(self.rules, masks.match_counts)
            ),
        )

    @property
    def xfer_tuples(self) -> Tuple[XferTuple, ...]:
        return self._state().xfer_tuples

    def normalized(self, reward: float) -> float:
        """Reward as a fraction of the initial runtime, comparable across graphs"""
        return reward / self.rt0 if self.rt0 > 0 else 0.0

    def current_cost(self) -> CostBreakdown:
        return self._analyze(self._graph).cost

    def reset(self) -> EnvState:
        self._graph = self.initial_graph
        self._step_index = 0
        self._done = False
        self._started = True
        self._episode_return = 0.0
        return self._state()

    def is_valid(self, action: Action) -> bool:
        if action.xfer_id == self.noop_id:
            return True
        if not 0 <= action.xfer_id < self.n_rules or not 0 <= action.location < self.location_cap:
            return False
        masks = self._analyze(self._graph).masks
        return bool(masks.location_masks[action.xfer_id, action.location])

    def valid_actions(self) -> List[Action]:
        """Every mask-valid action, NO-OP last"""
        masks = self._analyze(self._graph).masks
        actions = [Action(int(i), int(j)) for i, j in zip(*np.nonzero(masks.location_masks))]
        actions.append(Action(self.noop_id, 0))
        return actions

    def step(self, action: Action) -> StepResult:
        if not self._started:
            raise EpisodeFinished("step() called before reset()")
        if self._done:
            raise EpisodeFinished("step() called after the episode terminated")
        action = Action(int(action[0]), int(action[1]))
        self.real_steps += 1

        with self.monitor.time_step("real"):
            before = self.current_cost()
            rule_name: Optional[str] = None
            if action.xfer_id == self.noop_id:
                reward, valid, terminal = 0.0, True, True
                rule_name = "noop"
            elif not self.is_valid(action):
                reward, valid, terminal = self.settings.invalid_penalty, False, True
                rule_name = "invalid"
                if self.metrics is not None:
                    self.metrics.record_invalid_action()
            else:
                rule = self.rules[action.xfer_id]
                loc = self._analyze(self._graph).masks.locations[action.xfer_id][action.location]
                self._graph = apply(self._graph, rule, loc)
                self._step_index += 1
                after = self.current_cost()
                reward = self._reward(before, after)
                valid = True
                terminal = self._step_index >= self.settings.max_steps
                rule_name = rule.name
                if self.metrics is not None:
                    self.metrics.record_rule_application(rule.name)

        cost = self.current_cost()
        self._episode_return += reward
        reward_norm = self.normalized(reward)
        if self.record_telemetry:
            self.telemetry.append({
                "graph": self.name,
                "episode": self.episodes,
                "step": self.real_steps,
                "rule": rule_name,
                "runtime": cost.runtime_est,
                "flops": cost.flops,
                "mem": cost.mem_accesses,
                "launches": cost.kernel_launches,
                "reward": reward,
                "reward_norm": reward_norm,
                "valid": valid,
            })

        if terminal:
            self._done = True
            self.episodes += 1
            if self.metrics is not None:
                self.metrics.record_episode("real")
            log_episode("real", self.episodes, self._step_index, self._episode_return, cost.runtime_est,
                        rt0=self.rt0)

        info = {
            "valid": valid,
            "noop": action.xfer_id == self.noop_id,
            "rule": rule_name,
            "cost": cost,
            "runtime": cost.runtime_est,
            "flops": cost.flops,
            "mem": cost.mem_accesses,
            "launches": cost.kernel_launches,
            "reward_norm": reward_norm,
        }
        return StepResult(self._state(), reward, terminal, info)

    def _reward(self, before: CostBreakdown, after: CostBreakdown) -> float:
        s = self.settings
        if s.reward_kind == "combined":
            return reward_combined(before.runtime_est, after.runtime_est,
                                   float(before.mem_accesses), float(after.mem_accesses),
                                   s.alpha, s.beta, True, s.invalid_penalty)
        return reward_incremental(before.runtime_est, after.runtime_est, True, s.invalid_penalty)

    def close(self):
        self._cache.clear()
        self.telemetry.clear()
