"""
Rule Verification - Empirical equivalence checking of rewrite rules on random instantiations
"""

import hashlib
import json
from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from graphdream.exceptions import MalformedGraph, ShapeMismatch
from graphdream.graph.interpreter import DEFAULT_ATOL, DEFAULT_RTOL, evaluate, outputs_close, random_inputs
from graphdream.graph.ir import MAX_RANK, ComputationGraph
from graphdream.rules.pattern import RewriteRule, instantiate, parse_dim, rule_body
from graphdream.utils.logging import get_logger, log_rule_verification

logger = get_logger(__name__)

MAX_ATTEMPTS = 50

Instantiation = Tuple[Dict[str, Tuple[int, ...]], Dict[str, Any]]


def certificate_digest(rule: RewriteRule, trials: int) -> str:
    """sha256 over the canonical rule document and the passed-trial count"""
    payload = json.dumps({"rule": rule_body(rule), "trials": trials}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def has_valid_certificate(rule: RewriteRule) -> bool:
    return (
        rule.verified
        and rule.certificate is not None
        and rule.certificate == certificate_digest(rule, rule.trials)
    )


def input_ids(rule: RewriteRule) -> Dict[str, int]:
    """Shared Input-node ids for the variables of both sides"""
    return {var: i for i, var in enumerate(sorted(rule.source.variables()))}


def sample_instantiation(rule: RewriteRule, rng: np.random.Generator, max_dim: int = 4) -> Instantiation:
    """
    Random shapes and attribute values consistent with the rule's variable specs.

    Symbols are drawn so that every multiple k*sym stays within max_dim; variables
    without dims get a random rank and random dims.
    """
    factors: Dict[str, int] = {}
    for spec in rule.variables.values():
        for dim in spec.dims or ():
            factor, symbol = parse_dim(dim)
            if symbol is not None:
                factors[symbol] = max(factors.get(symbol, 1), factor)
    symbols = {s: int(rng.integers(1, max(1, max_dim // f) + 1)) for s, f in sorted(factors.items())}

    shapes: Dict[str, Tuple[int, ...]] = {}
    for name in sorted(rule.variables):
        spec = rule.variables[name]
        if spec.dims is not None:
            dims = []
            for dim in spec.dims:
                factor, symbol = parse_dim(dim)
                dims.append(factor if symbol is None else factor * symbols[symbol])
            shapes[name] = tuple(dims)
        elif spec.same_as is None:
            rank = int(rng.integers(1, MAX_RANK + 1))
            shapes[name] = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=rank))

    for name in sorted(rule.variables):
        target = name
        seen = set()
        while rule.variables[target].same_as is not None:
            if target in seen:
                raise MalformedGraph(f"rule {rule.name}: cyclic same_as chain at {name}")
            seen.add(target)
            target = rule.variables[target].same_as
        shapes[name] = shapes[target]

    attrs = {
        name: domain[int(rng.integers(0, len(domain)))]
        for name, domain in sorted(rule.attr_domains.items())
    }
    return shapes, attrs


def instantiate_pair(rule: RewriteRule, shapes: Dict[str, Tuple[int, ...]],
                     attrs: Dict[str, Any]) -> Tuple[ComputationGraph, ComputationGraph]:
    ids = input_ids(rule)
    return instantiate(rule.source, shapes, attrs, ids), instantiate(rule.target, shapes, attrs, ids)


def verify_rule(rule: RewriteRule, trials: int, rng: np.random.Generator, max_dim: int = 4,
                rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> RewriteRule:
    """
    Check source and target agree on `trials` random instantiations with random values.

    Returns a copy of the rule with `verified`, `trials` (passed count) and, when
    verified, a fresh certificate.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rule.check_variables()

    passed = 0
    reason: Optional[str] = None
    for _ in range(trials):
        source = None
        for _ in range(MAX_ATTEMPTS):
            shapes, attrs = sample_instantiation(rule, rng, max_dim)
            try:
                source = instantiate(rule.source, shapes, attrs, input_ids(rule))
                break
            except (ShapeMismatch, MalformedGraph):
                continue
        if source is None:
            reason = "no feasible instantiation of the source pattern"
            break
        try:
            target = instantiate(rule.target, shapes, attrs, input_ids(rule))
        except (ShapeMismatch, MalformedGraph) as e:
            reason = f"target does not type-check: {e}"
            break
        if source.shapes[source.outputs[0]] != target.shapes[target.outputs[0]]:
            reason = "source and target output shapes differ"
            break
        feed = random_inputs(source, rng)
        if not outputs_close(evaluate(source, feed), evaluate(target, feed), rtol, atol):
            reason = f"outputs differ for shapes {shapes}"
            break
        passed += 1

    verified = passed == trials
    log_rule_verification(rule.name, verified, passed, reason)
    return replace(
        rule,
        verified=verified,
        trials=passed,
        certificate=certificate_digest(rule, passed) if verified else None,
    )
