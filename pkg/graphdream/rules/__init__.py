"""
Rule Engine - Subgraph rewrite rules: matching, application, verification, pruning, masks
"""

from graphdream.rules.library import DEFAULT_LIBRARY, load_library, prepare_rules, read_rules, save_library
from graphdream.rules.masks import ActionMasks, compute_masks
from graphdream.rules.matcher import brute_force_matches, find_matches, match_at
from graphdream.rules.pattern import MatchLocation, Pattern, RewriteRule, TemplateNode, VariableSpec
from graphdream.rules.pruning import is_trivial, prune_trivial
from graphdream.rules.rewrite import apply
from graphdream.rules.verification import certificate_digest, sample_instantiation, verify_rule

__all__ = [
    "DEFAULT_LIBRARY",
    "ActionMasks",
    "MatchLocation",
    "Pattern",
    "RewriteRule",
    "TemplateNode",
    "VariableSpec",
    "apply",
    "brute_force_matches",
    "certificate_digest",
    "compute_masks",
    "find_matches",
    "is_trivial",
    "load_library",
    "match_at",
    "prepare_rules",
    "prune_trivial",
    "read_rules",
    "sample_instantiation",
    "save_library",
    "verify_rule",
]
