"""
Pattern Matcher - Location enumeration for rewrite rules
"""

import itertools
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from graphdream.graph.ir import ComputationGraph, Node, OpKind
from graphdream.rules.pattern import (
    MatchLocation,
    RewriteRule,
    TemplateNode,
    bind_symbols,
    is_attr_var,
)

ATTR_DEFAULTS: Dict[OpKind, Dict[str, Any]] = {
    OpKind.CONV2D: {"stride": 1, "padding": 0},
    OpKind.FUSED_CONV_RELU: {"stride": 1, "padding": 0},
    OpKind.CONCAT: {"axis": 0},
    OpKind.SPLIT: {"axis": 0, "parts": 2, "index": 0},
}

Consumers = Mapping[int, List[Tuple[int, int]]]


def effective_attrs(node: Node, graph: ComputationGraph) -> Dict[str, Any]:
    """Node attrs with kind defaults filled in"""
    attrs = dict(ATTR_DEFAULTS.get(node.kind, {}))
    attrs.update(node.attrs)
    if node.kind == OpKind.TRANSPOSE and "perm" not in attrs and node.inputs:
        rank = graph.shapes[node.inputs[0]].rank
        attrs["perm"] = tuple(reversed(range(rank)))
    return attrs


def _attrs_match(template: TemplateNode, node: Node, graph: ComputationGraph,
                 rule: RewriteRule, attr_binding: Dict[str, Any]) -> bool:
    actual = effective_attrs(node, graph)
    expected_keys = set(template.attrs) | set(ATTR_DEFAULTS.get(node.kind, {}))
    if node.kind == OpKind.TRANSPOSE:
        expected_keys.add("perm")
    for key in expected_keys:
        value = template.attrs.get(key, ATTR_DEFAULTS.get(node.kind, {}).get(key))
        have = actual.get(key)
        if is_attr_var(value):
            name = value[1:]
            if have not in rule.attr_domains.get(name, ()):
                return False
            if attr_binding.setdefault(name, have) != have:
                return False
        elif value is None:
            # transpose without a literal perm in the template matches any perm
            continue
        elif have != value:
            return False
    return True


def _side_conditions(graph: ComputationGraph, rule: RewriteRule, anchor: int,
                     structural: Dict[str, int], variables: Dict[str, int],
                     consumers: Consumers) -> bool:
    matched = set(structural.values())
    if len(matched) != len(structural):
        return False
    if matched & set(variables.values()):
        return False
    outputs = set(graph.outputs)
    for node_id in matched:
        if node_id == anchor:
            continue
        if node_id in outputs:
            return False
        if any(c not in matched for c, _ in consumers[node_id]):
            return False

    symbols: Dict[str, int] = {}
    for name, node_id in variables.items():
        spec = rule.variables[name]
        shape = graph.shapes[node_id]
        if spec.same_as is not None and graph.shapes[variables[spec.same_as]] != shape:
            return False
        if not bind_symbols(spec, shape, symbols):
            return False
    return True


def _location(anchor: int, structural: Dict[str, int], variables: Dict[str, int],
              attr_binding: Dict[str, Any]) -> MatchLocation:
    return MatchLocation(
        anchor=anchor,
        binding=tuple(sorted(variables.items())),
        nodes=tuple(sorted(structural.items())),
        attr_binding=tuple(sorted(attr_binding.items())),
    )


def match_at(graph: ComputationGraph, rule: RewriteRule, anchor: int,
             consumers: Optional[Consumers] = None) -> Optional[MatchLocation]:
    """
    Try to match the source pattern with its output at `anchor`.

    Patterns are trees over template nodes rooted at the output, so the match at an
    anchor is unique when it exists.
    """
    if anchor not in graph.nodes:
        return None
    if consumers is None:
        consumers = graph.consumers()
    pattern = rule.source
    templates = {t.name: t for t in pattern.nodes}
    structural: Dict[str, int] = {}
    variables: Dict[str, int] = {}
    attr_binding: Dict[str, Any] = {}

    def visit(name: str, node_id: int) -> bool:
        template = templates[name]
        node = graph.nodes[node_id]
        if node.kind != template.kind or len(node.inputs) != len(template.inputs):
            return False
        if name in structural:
            return structural[name] == node_id
        if not _attrs_match(template, node, graph, rule, attr_binding):
            return False
        structural[name] = node_id
        for child, src in zip(template.inputs, node.inputs):
            if child in templates:
                if not visit(child, src):
                    return False
            elif variables.setdefault(child, src) != src:
                return False
        return True

    if not visit(pattern.output, anchor):
        return None
    if len(structural) != len(templates):
        return None
    if not _side_conditions(graph, rule, anchor, structural, variables, consumers):
        return None
    return _location(anchor, structural, variables, attr_binding)


def find_matches(graph: ComputationGraph, rule: RewriteRule,
                 consumers: Optional[Consumers] = None) -> List[MatchLocation]:
    """All locations of `rule` in `graph`, sorted by (anchor id, binding)"""
    if consumers is None:
        consumers = graph.consumers()
    output_kind = rule.source.template(rule.source.output).kind
    found = []
    for node_id, node in graph.nodes.items():
        if node.kind != output_kind:
            continue
        loc = match_at(graph, rule, node_id, consumers)
        if loc is not None:
            found.append(loc)
    return sorted(found, key=MatchLocation.sort_key)


def brute_force_matches(graph: ComputationGraph, rule: RewriteRule) -> List[MatchLocation]:
    """
    Exhaustive oracle: every injective assignment of template nodes to graph nodes
    of the same kind, filtered by edges, attributes and side conditions.
    """
    consumers = graph.consumers()
    templates: Sequence[TemplateNode] = rule.source.nodes
    names = [t.name for t in templates]
    candidates = [[i for i, n in graph.nodes.items() if n.kind == t.kind] for t in templates]
    found = set()
    for combo in itertools.product(*candidates):
        if len(set(combo)) != len(combo):
            continue
        structural = dict(zip(names, combo))
        variables: Dict[str, int] = {}
        attr_binding: Dict[str, Any] = {}
        ok = True
        for template, node_id in zip(templates, combo):
            node = graph.nodes[node_id]
            if len(node.inputs) != len(template.inputs):
                ok = False
                break
            if not _attrs_match(template, node, graph, rule, attr_binding):
                ok = False
                break
            for child, src in zip(template.inputs, node.inputs):
                if child in structural:
                    if structural[child] != src:
                        ok = False
                        break
                elif variables.setdefault(child, src) != src:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        anchor = structural[rule.source.output]
        if _side_conditions(graph, rule, anchor, structural, variables, consumers):
            found.add(_location(anchor, structural, variables, attr_binding))
    return sorted(found, key=MatchLocation.sort_key)
