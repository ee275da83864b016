"""
Rewrite Application - Replace a matched subgraph with the instantiated target
"""

from typing import Dict, Optional

from graphdream.exceptions import ShapeMismatch, StaleLocation
from graphdream.graph.ir import ComputationGraph, Node, TensorShape
from graphdream.graph.shapes import node_shape
from graphdream.rules.matcher import Consumers, match_at
from graphdream.rules.pattern import MatchLocation, RewriteRule, resolve_attrs


def apply(graph: ComputationGraph, rule: RewriteRule, loc: MatchLocation,
          consumers: Optional[Consumers] = None) -> ComputationGraph:
    """
    Return a new graph with the source match at `loc` replaced by the rule's target.

    New nodes take fresh ids from graph.next_id in target order; consumers and outputs
    of the old anchor are rewired; nodes no longer reachable from the outputs are dropped.
    """
    current = match_at(graph, rule, loc.anchor, consumers)
    if current is None or current != loc:
        raise StaleLocation(f"rule {rule.name}: location at node {loc.anchor} does not match this graph")

    variables = loc.variables
    attr_values = loc.attrs
    names: Dict[str, int] = dict(variables)
    removed = set(loc.structural.values())
    nodes: Dict[int, Node] = {i: n for i, n in graph.nodes.items() if i not in removed}
    shapes: Dict[int, TensorShape] = {i: s for i, s in graph.shapes.items() if i in nodes}

    next_id = graph.next_id
    for template in rule.target.nodes:
        node = Node(next_id, template.kind, tuple(names[i] for i in template.inputs), resolve_attrs(template, attr_values))
        shapes[next_id] = node_shape(node, [shapes[i] for i in node.inputs])
        nodes[next_id] = node
        names[template.name] = next_id
        next_id += 1

    replacement = names[rule.target.output]
    if shapes[replacement] != graph.shapes[loc.anchor]:
        raise ShapeMismatch(
            f"rule {rule.name}: replacement shape {shapes[replacement].dims} "
            f"differs from {graph.shapes[loc.anchor].dims}"
        )

    for node_id, node in list(nodes.items()):
        if loc.anchor in node.inputs:
            nodes[node_id] = node.with_inputs([replacement if i == loc.anchor else i for i in node.inputs])
    outputs = tuple(replacement if o == loc.anchor else o for o in graph.outputs)

    rewired = ComputationGraph(nodes, outputs)
    keep = set(rewired.reachable())
    return ComputationGraph(
        {i: n for i, n in nodes.items() if i in keep},
        outputs,
        {i: s for i, s in shapes.items() if i in keep},
    )
