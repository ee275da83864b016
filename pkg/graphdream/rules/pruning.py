"""
Rule Pruning - Drop rewrites that only rename inputs or share a common subgraph
"""

from typing import Dict, List, Optional, Tuple

from graphdream.exceptions import MalformedGraph, ShapeMismatch
from graphdream.graph.hashing import canonical_hash
from graphdream.graph.ir import ComputationGraph, Node, OpKind
from graphdream.graph.shapes import infer_shapes
from graphdream.rules.pattern import RewriteRule, parse_dim
from graphdream.rules.verification import instantiate_pair
from graphdream.utils.logging import get_logger

logger = get_logger(__name__)

CANONICAL_SYMBOL_VALUES = (2, 3, 4, 1)


def canonical_instantiation(rule: RewriteRule) -> Optional[Tuple[ComputationGraph, ComputationGraph]]:
    """
    Instantiate both sides with every symbol set to one fixed value (2 first) and
    the first value of each attribute domain; None if no such value type-checks.
    """
    attrs = {name: domain[0] for name, domain in rule.attr_domains.items()}
    for value in CANONICAL_SYMBOL_VALUES:
        shapes: Dict[str, Tuple[int, ...]] = {}
        for name, spec in rule.variables.items():
            if spec.dims is not None:
                shapes[name] = tuple(
                    factor if symbol is None else factor * value
                    for factor, symbol in (parse_dim(d) for d in spec.dims)
                )
            elif spec.same_as is None:
                shapes[name] = (value, value)
        for name, spec in rule.variables.items():
            root = name
            while rule.variables[root].same_as is not None:
                root = rule.variables[root].same_as
            shapes[name] = shapes[root]
        try:
            return instantiate_pair(rule, shapes, attrs)
        except (ShapeMismatch, MalformedGraph):
            continue
    return None


def _replace_with_input(graph: ComputationGraph, node_id: int, new_id: int) -> ComputationGraph:
    nodes = {i: n for i, n in graph.nodes.items() if i != node_id}
    nodes[new_id] = Node(new_id, OpKind.INPUT, (), {"shape": graph.shapes[node_id].dims})
    for i, n in list(nodes.items()):
        if node_id in n.inputs:
            nodes[i] = n.with_inputs([new_id if s == node_id else s for s in n.inputs])
    outputs = tuple(new_id if o == node_id else o for o in graph.outputs)
    keep = set(ComputationGraph(nodes, outputs).reachable())
    return infer_shapes(ComputationGraph({i: n for i, n in nodes.items() if i in keep}, outputs))


def _shared_frontier(source: ComputationGraph, target: ComputationGraph) -> Optional[Tuple[int, int]]:
    """First (source node, target node) pair computing the same op over the same shared inputs"""
    shared_inputs = set(source.input_ids) & set(target.input_ids)
    for u in source.compute_nodes():
        if not u.inputs or not set(u.inputs) <= shared_inputs:
            continue
        for v in target.compute_nodes():
            if v.kind == u.kind and v.inputs == u.inputs and dict(v.attrs) == dict(u.attrs):
                return u.id, v.id
    return None


def strip_common_subgraph(source: ComputationGraph,
                          target: ComputationGraph) -> Tuple[ComputationGraph, ComputationGraph]:
    """
    Repeatedly replace identical frontier nodes on both sides by one fresh shared input
    """
    while True:
        pair = _shared_frontier(source, target)
        if pair is None:
            return source, target
        new_id = max(source.next_id, target.next_id)
        source = _replace_with_input(source, pair[0], new_id)
        target = _replace_with_input(target, pair[1], new_id)


def is_trivial(rule: RewriteRule) -> bool:
    pair = canonical_instantiation(rule)
    if pair is None:
        return False
    source, target = pair
    if canonical_hash(source) == canonical_hash(target):
        return True
    source, target = strip_common_subgraph(source, target)
    return canonical_hash(source) == canonical_hash(target)


def prune_trivial(rules: List[RewriteRule]) -> List[RewriteRule]:
    """Rules minus renamings and common-subgraph duplicates, order preserved"""
    kept = []
    for rule in rules:
        if is_trivial(rule):
            logger.info("rule_pruned", rule=rule.name, id=rule.id)
            continue
        kept.append(rule)
    return kept
