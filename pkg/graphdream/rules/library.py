"""
Rule Library - Loading, certifying and saving rule library files
"""

import json
from pathlib import Path
from typing import List, Optional

import numpy as np

from graphdream.exceptions import RuleFormatError
from graphdream.graph.interpreter import DEFAULT_ATOL, DEFAULT_RTOL
from graphdream.rules.pattern import RewriteRule, rule_from_doc, rule_to_doc
from graphdream.rules.pruning import prune_trivial
from graphdream.rules.verification import has_valid_certificate, verify_rule
from graphdream.utils.logging import get_logger

logger = get_logger(__name__)

FORMAT_VERSION = 1
DEFAULT_LIBRARY = Path(__file__).parent / "data" / "default_rules.json"


def read_rules(path: Optional[Path] = None) -> List[RewriteRule]:
    """Parse a library file; rule ids are positions in the file"""
    path = Path(path) if path is not None else DEFAULT_LIBRARY
    if not path.exists():
        raise FileNotFoundError(f"rule library not found: {path}")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise RuleFormatError(f"rule library {path} is not valid JSON: {e}") from e
    if not isinstance(document, dict) or "rules" not in document:
        raise RuleFormatError(f"rule library {path} has no 'rules' list")
    version = document.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise RuleFormatError(f"rule library {path}: unsupported format_version {version}")
    return [rule_from_doc(doc, i) for i, doc in enumerate(document["rules"])]


def save_library(rules: List[RewriteRule], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"format_version": FORMAT_VERSION, "rules": [rule_to_doc(r) for r in rules]}
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def load_library(path: Optional[Path], trials: int, rng: np.random.Generator, max_dim: int = 4,
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 force: bool = False) -> List[RewriteRule]:
    """
    Read a library and verify every rule whose certificate is missing or stale
    (all of them when `force`).
    """
    rules = []
    for rule in read_rules(path):
        if not force and has_valid_certificate(rule):
            rules.append(rule)
            continue
        rules.append(verify_rule(rule, trials, rng, max_dim, rtol, atol))
    return rules


def prepare_rules(path: Optional[Path], trials: int, rng: np.random.Generator, max_dim: int = 4,
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> List[RewriteRule]:
    """
    The action vocabulary an environment uses: verified rules with trivial ones pruned
    """
    rules = load_library(path, trials, rng, max_dim, rtol, atol)
    rejected = [r.name for r in rules if not r.verified]
    if rejected:
        logger.warning("rules_rejected", rules=rejected)
    kept = prune_trivial([r for r in rules if r.verified])
    logger.info("rule_library_ready", total=len(rules), verified=len(rules) - len(rejected), kept=len(kept))
    return kept
