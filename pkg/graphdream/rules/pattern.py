"""
Rewrite Patterns - Template graphs, pattern variables, and rewrite rules
"""

import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from graphdream.exceptions import RuleFormatError, UnboundVariable
from graphdream.graph.ir import ComputationGraph, Node, OpKind, TensorShape
from graphdream.graph.shapes import infer_shapes

DimSpec = Union[int, str]

_MULTIPLE = re.compile(r"^(\d+)\*([A-Za-z_]\w*)$")
_SYMBOL = re.compile(r"^[A-Za-z_]\w*$")


def parse_dim(dim: DimSpec) -> Tuple[int, Optional[str]]:
    """
    A dim spec is an int (fixed size), a symbol "m", or a multiple "2*m".
    Returns (factor, symbol); fixed sizes come back as (size, None).
    """
    if isinstance(dim, int):
        if dim < 1:
            raise RuleFormatError(f"fixed dim must be >= 1, got {dim}")
        return dim, None
    match = _MULTIPLE.match(dim)
    if match:
        return int(match.group(1)), match.group(2)
    if _SYMBOL.match(dim):
        return 1, dim
    raise RuleFormatError(f"unparseable dim spec {dim!r}")


@dataclass(frozen=True)
class VariableSpec:
    """
    Tensor slot of a pattern.

    `dims` fixes the rank and relates sizes through shared symbols; `same_as` ties the
    shape to another variable; neither means any shape.
    """
    name: str
    dims: Optional[Tuple[DimSpec, ...]] = None
    same_as: Optional[str] = None

    def __post_init__(self):
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(self.dims))
            for dim in self.dims:
                parse_dim(dim)
        if self.dims is not None and self.same_as is not None:
            raise RuleFormatError(f"variable {self.name}: dims and same_as are exclusive")


@dataclass(frozen=True)
class TemplateNode:
    """Operator in a pattern; attrs values are literals or "$name" attribute variables"""
    name: str
    kind: OpKind
    inputs: Tuple[str, ...]
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", OpKind(self.kind))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "attrs", {k: _freeze(v) for k, v in dict(self.attrs).items()})


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def is_attr_var(value: Any) -> bool:
    return isinstance(value, str) and value.startswith("$")


@dataclass(frozen=True)
class Pattern:
    """
    Template nodes in topological order plus the designated output, which names a
    template node or (for elimination targets) a variable.
    """
    nodes: Tuple[TemplateNode, ...]
    output: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def node_names(self) -> List[str]:
        return [t.name for t in self.nodes]

    def template(self, name: str) -> TemplateNode:
        for t in self.nodes:
            if t.name == name:
                return t
        raise KeyError(name)

    def variables(self) -> List[str]:
        """Variable names referenced, in first-use order"""
        names = set(self.node_names)
        seen: List[str] = []
        for t in self.nodes:
            for inp in t.inputs:
                if inp not in names and inp not in seen:
                    seen.append(inp)
        if self.output not in names and self.output not in seen:
            seen.append(self.output)
        return seen

    def attr_variables(self) -> List[str]:
        found: List[str] = []
        for t in self.nodes:
            for value in t.attrs.values():
                if is_attr_var(value) and value[1:] not in found:
                    found.append(value[1:])
        return found

    @property
    def output_is_variable(self) -> bool:
        return self.output not in self.node_names


@dataclass(frozen=True)
class RewriteRule:
    """A source pattern, its replacement, and the equivalence certificate"""
    id: int
    name: str
    variables: Mapping[str, VariableSpec]
    source: Pattern
    target: Pattern
    attr_domains: Mapping[str, Tuple[Any, ...]] = field(default_factory=dict)
    verified: bool = False
    trials: int = 0
    certificate: Optional[str] = None

    def check_variables(self) -> None:
        """Raise UnboundVariable / RuleFormatError when the two patterns disagree"""
        source_vars = set(self.source.variables())
        target_vars = set(self.target.variables())
        extra = target_vars - source_vars
        if extra:
            raise UnboundVariable(f"rule {self.name}: target uses unbound variables {sorted(extra)}")
        missing = source_vars - target_vars
        if missing:
            raise RuleFormatError(f"rule {self.name}: target drops variables {sorted(missing)}")
        undeclared = source_vars - set(self.variables)
        if undeclared:
            raise RuleFormatError(f"rule {self.name}: undeclared variables {sorted(undeclared)}")
        if self.source.output_is_variable:
            raise RuleFormatError(f"rule {self.name}: source output must be a template node")
        attr_vars = set(self.source.attr_variables())
        if set(self.target.attr_variables()) - attr_vars:
            raise UnboundVariable(f"rule {self.name}: target uses unbound attribute variables")
        if attr_vars - set(self.attr_domains):
            raise RuleFormatError(f"rule {self.name}: attribute variables without a domain")


@dataclass(frozen=True)
class MatchLocation:
    """
    One match site: `anchor` is the graph node matched by the source output;
    `binding` maps variables to graph node ids; `nodes` maps template names to the
    matched graph nodes; `attr_binding` holds attribute-variable values.
    """
    anchor: int
    binding: Tuple[Tuple[str, int], ...]
    nodes: Tuple[Tuple[str, int], ...] = ()
    attr_binding: Tuple[Tuple[str, Any], ...] = ()

    @property
    def variables(self) -> Dict[str, int]:
        return dict(self.binding)

    @property
    def structural(self) -> Dict[str, int]:
        return dict(self.nodes)

    @property
    def attrs(self) -> Dict[str, Any]:
        return dict(self.attr_binding)

    def sort_key(self) -> Tuple:
        return self.anchor, self.binding


def resolve_attrs(template: TemplateNode, attr_values: Mapping[str, Any]) -> Dict[str, Any]:
    resolved = {}
    for key, value in template.attrs.items():
        resolved[key] = attr_values[value[1:]] if is_attr_var(value) else value
    return resolved


def instantiate(pattern: Pattern, var_shapes: Mapping[str, Sequence[int]],
                attr_values: Mapping[str, Any], input_ids: Mapping[str, int]) -> ComputationGraph:
    """
    Build a standalone graph for a pattern: variables become Input nodes with the
    given ids, template nodes follow with fresh ids.
    """
    nodes: Dict[int, Node] = {}
    names: Dict[str, int] = {}
    for var in pattern.variables():
        node_id = input_ids[var]
        nodes[node_id] = Node(node_id, OpKind.INPUT, (), {"shape": tuple(var_shapes[var])})
        names[var] = node_id
    next_id = max(input_ids.values(), default=-1) + 1
    for t in pattern.nodes:
        nodes[next_id] = Node(next_id, t.kind, tuple(names[i] for i in t.inputs), resolve_attrs(t, attr_values))
        names[t.name] = next_id
        next_id += 1
    return infer_shapes(ComputationGraph(nodes, (names[pattern.output],)))


def bind_symbols(spec: VariableSpec, shape: TensorShape, symbols: Dict[str, int]) -> bool:
    """Unify a concrete shape with a symbolic dims spec, extending `symbols` in place"""
    if spec.dims is None:
        return True
    if len(spec.dims) != shape.rank:
        return False
    for dim, actual in zip(spec.dims, shape.dims):
        factor, symbol = parse_dim(dim)
        if symbol is None:
            if actual != factor:
                return False
            continue
        if actual % factor:
            return False
        value = actual // factor
        if symbols.setdefault(symbol, value) != value:
            return False
    return True


# -- document format ------------------------------------------------------------

def _pattern_from_doc(doc: Mapping[str, Any]) -> Pattern:
    try:
        nodes = tuple(
            TemplateNode(n["name"], OpKind(n["kind"]), tuple(n.get("inputs", ())), n.get("attrs", {}))
            for n in doc["nodes"]
        )
        return Pattern(nodes, doc["output"])
    except (KeyError, ValueError, TypeError) as e:
        raise RuleFormatError(f"bad pattern document: {e}") from e


def _pattern_to_doc(pattern: Pattern) -> Dict[str, Any]:
    return {
        "nodes": [
            {"name": t.name, "kind": t.kind.value, "inputs": list(t.inputs),
             "attrs": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(t.attrs.items())}}
            for t in pattern.nodes
        ],
        "output": pattern.output,
    }


def rule_from_doc(doc: Mapping[str, Any], rule_id: int) -> RewriteRule:
    try:
        variables = {}
        for name, spec in doc["variables"].items():
            if isinstance(spec, Mapping):
                dims = spec.get("dims")
                variables[name] = VariableSpec(name, tuple(dims) if dims is not None else None, spec.get("same_as"))
            else:
                variables[name] = VariableSpec(name, tuple(spec) if spec is not None else None)
        rule = RewriteRule(
            id=rule_id,
            name=doc["name"],
            variables=variables,
            source=_pattern_from_doc(doc["source"]),
            target=_pattern_from_doc(doc["target"]),
            attr_domains={k: tuple(v) for k, v in doc.get("attr_domains", {}).items()},
            verified=bool(doc.get("verified", False)),
            trials=int(doc.get("trials", 0)),
            certificate=doc.get("certificate"),
        )
    except (KeyError, TypeError) as e:
        raise RuleFormatError(f"bad rule document #{rule_id}: {e}") from e
    rule.check_variables()
    return rule


def rule_body(rule: RewriteRule) -> Dict[str, Any]:
    """Everything that defines the rewrite, without verification status"""
    variables = {}
    for name, spec in sorted(rule.variables.items()):
        entry: Dict[str, Any] = {}
        if spec.dims is not None:
            entry["dims"] = list(spec.dims)
        if spec.same_as is not None:
            entry["same_as"] = spec.same_as
        variables[name] = entry
    return {
        "name": rule.name,
        "variables": variables,
        "attr_domains": {k: list(v) for k, v in sorted(rule.attr_domains.items())},
        "source": _pattern_to_doc(rule.source),
        "target": _pattern_to_doc(rule.target),
    }


def rule_to_doc(rule: RewriteRule) -> Dict[str, Any]:
    doc = rule_body(rule)
    doc.update({"verified": rule.verified, "trials": rule.trials, "certificate": rule.certificate})
    return doc
