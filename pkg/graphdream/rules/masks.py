"""
Action Masks - Valid-transformation and valid-location masks for a graph
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from graphdream.graph.ir import ComputationGraph
from graphdream.rules.matcher import find_matches
from graphdream.rules.pattern import MatchLocation, RewriteRule


@dataclass(frozen=True)
class ActionMasks:
    """
    xfer_mask[i] is set iff rule i has a match; location_masks[i, j] is set for the
    first min(L, count) matches of rule i. `locations[i]` keeps the (truncated)
    enumeration so an action index maps straight back to a MatchLocation.
    """
    xfer_mask: np.ndarray
    location_masks: np.ndarray
    locations: List[List[MatchLocation]]
    match_counts: List[int]

    def __iter__(self):
        yield self.xfer_mask
        yield self.location_masks

    @property
    def location_cap(self) -> int:
        return self.location_masks.shape[1]


def compute_masks(graph: ComputationGraph, rules: Sequence[RewriteRule], location_cap: int) -> ActionMasks:
    if location_cap < 1:
        raise ValueError(f"location cap must be >= 1, got {location_cap}")
    consumers = graph.consumers()
    xfer_mask = np.zeros(len(rules), dtype=bool)
    location_masks = np.zeros((len(rules), location_cap), dtype=bool)
    locations: List[List[MatchLocation]] = []
    counts: List[int] = []
    for i, rule in enumerate(rules):
        matches = find_matches(graph, rule, consumers)
        counts.append(len(matches))
        kept = matches[:location_cap]
        locations.append(kept)
        xfer_mask[i] = bool(matches)
        location_masks[i, : len(kept)] = True
    return ActionMasks(xfer_mask, location_masks, locations, counts)
