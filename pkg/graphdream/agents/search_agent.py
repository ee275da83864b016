"""
Search Agents - Cost-directed greedy and bounded backtracking baselines
"""

import heapq
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from graphdream.agents.base_agent import AgentType, BaseAgent, EpisodeResult
from graphdream.config.settings import SearchSettings
from graphdream.cost.model import DEFAULT_WEIGHTS, CostWeights, graph_cost
from graphdream.env.environment import GraphOptEnv
from graphdream.exceptions import ConfigError, RuleError
from graphdream.graph.hashing import canonical_hash
from graphdream.graph.interpreter import equivalent
from graphdream.graph.ir import ComputationGraph
from graphdream.rules.matcher import find_matches
from graphdream.rules.pattern import MatchLocation, RewriteRule
from graphdream.rules.rewrite import apply
from graphdream.utils.logging import get_logger

logger = get_logger(__name__)

SPOT_CHECK_TRIALS = 10
IMPROVEMENT_EPS = 1e-15


@dataclass(frozen=True)
class SearchConfig:
    budget: int = 10_000
    relax: float = 1.05
    queue_cap: int = 1000
    check_equivalence: bool = True
    warm_start: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError(f"search budget must be >= 1, got {self.budget}")
        if self.relax < 1.0:
            raise ConfigError(f"search relax must be >= 1, got {self.relax}")
        if self.queue_cap < 1:
            raise ConfigError(f"queue_cap must be >= 1, got {self.queue_cap}")

    @classmethod
    def from_settings(cls, settings: SearchSettings) -> "SearchConfig":
        return cls(settings.budget, settings.relax, settings.queue_cap, settings.check_equivalence)


@dataclass(frozen=True)
class AppliedStep:
    rule_id: int
    rule_name: str
    location: MatchLocation
    cost_after: float


@dataclass
class SearchResult:
    graph: ComputationGraph
    applied: List[AppliedStep] = field(default_factory=list)
    initial_cost: float = 0.0
    final_cost: float = 0.0
    expanded: int = 0
    budget_exhausted: bool = False
    cost_trace: List[float] = field(default_factory=list)

    @property
    def rule_names(self) -> List[str]:
        return [step.rule_name for step in self.applied]


def _candidates(graph: ComputationGraph, rules: Sequence[RewriteRule],
                weights: CostWeights) -> List[Tuple[float, RewriteRule, MatchLocation, ComputationGraph]]:
    """Every single-rewrite successor in (rule id, location order)"""
    consumers = graph.consumers()
    out = []
    for rule in rules:
        for loc in find_matches(graph, rule, consumers):
            successor = apply(graph, rule, loc, consumers)
            out.append((graph_cost(successor, weights).runtime_est, rule, loc, successor))
    return out


def replay(graph: ComputationGraph, rules: Sequence[RewriteRule],
           applied: Sequence[AppliedStep]) -> List[ComputationGraph]:
    """Intermediate graphs of a rewrite sequence, the input excluded"""
    by_id = {rule.id: rule for rule in rules}
    graphs = []
    current = graph
    for step in applied:
        current = apply(current, by_id[step.rule_id], step.location)
        graphs.append(current)
    return graphs


def spot_check(graph: ComputationGraph, rules: Sequence[RewriteRule], applied: Sequence[AppliedStep],
               rng: np.random.Generator, trials: int = SPOT_CHECK_TRIALS):
    """Raise RuleError unless every intermediate graph agrees with the input on random inputs"""
    for i, candidate in enumerate(replay(graph, rules, applied)):
        if not equivalent(graph, candidate, trials, rng):
            raise RuleError(f"rewrite sequence diverges from its input at step {i} ({applied[i].rule_name})")


def greedy_optimize(graph: ComputationGraph, rules: Sequence[RewriteRule],
                    weights: CostWeights = DEFAULT_WEIGHTS, budget: Optional[int] = None) -> SearchResult:
    """
    Apply the single rewrite with the largest runtime reduction until none improves,
    or until `budget` graphs have been expanded. Ties go to the lowest
    (rule id, location order).
    """
    cost = graph_cost(graph, weights).runtime_est
    result = SearchResult(graph=graph, initial_cost=cost, cost_trace=[cost])
    while True:
        if budget is not None and result.expanded >= budget:
            result.budget_exhausted = True
            break
        best = None
        for cand_cost, rule, loc, successor in _candidates(graph, rules, weights):
            if cand_cost < cost - IMPROVEMENT_EPS and (best is None or cand_cost < best[0]):
                best = (cand_cost, rule, loc, successor)
        result.expanded += 1
        if best is None:
            break
        cost, rule, loc, graph = best
        result.applied.append(AppliedStep(rule.id, rule.name, loc, cost))
        result.cost_trace.append(cost)
    result.graph = graph
    result.final_cost = cost
    return result


def backtracking_optimize(graph: ComputationGraph, rules: Sequence[RewriteRule], cfg: SearchConfig,
                          weights: CostWeights = DEFAULT_WEIGHTS) -> SearchResult:
    """
    Best-first search over graph states deduplicated by canonical hash. A successor is
    enqueued when its runtime is within relax x the best runtime seen so far; the
    queue keeps its `queue_cap` cheapest entries. Stops after `budget` expansions in total.

    With warm_start a greedy descent runs first and its expansions count against the
    budget; the graphs it passed through are marked seen. Its result seeds the
    incumbent and the queue, so the returned cost never exceeds greedy's whenever the
    budget covers the descent.
    """
    initial_cost = graph_cost(graph, weights).runtime_est
    counter = itertools.count()
    best_cost, best_graph, best_path = initial_cost, graph, []
    heap: List[Tuple[float, int, ComputationGraph, List[AppliedStep]]] = [(initial_cost, next(counter), graph, [])]
    seen = {canonical_hash(graph)}

    expanded = 0
    if cfg.warm_start:
        greedy = greedy_optimize(graph, rules, weights, budget=cfg.budget)
        expanded = greedy.expanded
        seen.update(canonical_hash(g) for g in replay(graph, rules, greedy.applied))
        if greedy.applied:
            best_cost, best_graph, best_path = greedy.final_cost, greedy.graph, list(greedy.applied)
            heapq.heappush(heap, (best_cost, next(counter), best_graph, best_path))

    while heap and expanded < cfg.budget:
        cost, _, current, path = heapq.heappop(heap)
        expanded += 1
        for cand_cost, rule, loc, successor in _candidates(current, rules, weights):
            key = canonical_hash(successor)
            if key in seen:
                continue
            seen.add(key)
            if cand_cost > cfg.relax * best_cost:
                continue
            new_path = path + [AppliedStep(rule.id, rule.name, loc, cand_cost)]
            if cand_cost < best_cost - IMPROVEMENT_EPS:
                best_cost, best_graph, best_path = cand_cost, successor, new_path
            heapq.heappush(heap, (cand_cost, next(counter), successor, new_path))
        if len(heap) > cfg.queue_cap:
            heap = heapq.nsmallest(cfg.queue_cap, heap)
            heapq.heapify(heap)

    exhausted = bool(heap) and expanded >= cfg.budget
    if exhausted:
        logger.info("search_budget_exhausted", budget=cfg.budget, best_cost=best_cost)
    trace = [initial_cost] + [step.cost_after for step in best_path]
    return SearchResult(best_graph, best_path, initial_cost, best_cost, expanded, exhausted, trace)


class SearchAgent(BaseAgent):
    """
    Greedy or backtracking search run against an environment's initial graph. Search
    does not step the environment, so it consumes no real interactions.
    """

    def __init__(self, method: AgentType, cfg: Optional[SearchConfig] = None):
        if method not in (AgentType.GREEDY, AgentType.BACKTRACKING):
            raise ValueError(f"not a search method: {method}")
        super().__init__(method)
        self.cfg = cfg or SearchConfig()
        self.last_result: Optional[SearchResult] = None

    def search(self, graph: ComputationGraph, rules: Sequence[RewriteRule], weights: CostWeights) -> SearchResult:
        if self.agent_type == AgentType.GREEDY:
            return greedy_optimize(graph, rules, weights)
        return backtracking_optimize(graph, rules, self.cfg, weights)

    def run_episode(self, env: GraphOptEnv, rng: np.random.Generator) -> EpisodeResult:
        result = self.search(env.initial_graph, env.rules, env.weights)
        if self.cfg.check_equivalence:
            spot_check(env.initial_graph, env.rules, result.applied, rng)
        self.last_result = result
        return EpisodeResult(
            method=self.agent_type.value,
            graph_name=env.name,
            initial_cost=result.initial_cost,
            final_cost=result.final_cost,
            final_graph=result.graph,
            applied=result.rule_names,
            episode_return=result.initial_cost - result.final_cost,
            initial_mem=float(env.initial_cost.mem_accesses),
            final_mem=float(graph_cost(result.graph, env.weights).mem_accesses),
        )
