"""
Canonical Hashing - Relabeling-invariant graph digests
"""

import hashlib
import heapq
from typing import Dict, List, Tuple

from graphdream.graph.ir import ComputationGraph, Node, OpKind


def _digest(*parts: object) -> bytes:
    return hashlib.sha256(repr(parts).encode()).digest()


def _node_label(node: Node, graph: ComputationGraph) -> Tuple:
    # Input attrs carry only the shape, so input naming never reaches the hash
    attrs = tuple(sorted((k, v) for k, v in node.attrs.items() if not (node.kind == OpKind.INPUT and k != "shape")))
    shape = graph.shapes[node.id].dims if node.id in graph.shapes else None
    return node.kind.value, attrs, shape


def _refined_keys(graph: ComputationGraph, order: List[int]) -> Dict[int, Tuple[bytes, bytes]]:
    """
    Bottom-up (what a node computes) and top-down (how it is consumed) structural
    hashes; together they order nodes independently of their ids.
    """
    up: Dict[int, bytes] = {}
    for node_id in order:
        node = graph.nodes[node_id]
        up[node_id] = _digest(_node_label(node, graph), tuple(up[i] for i in node.inputs))

    output_positions: Dict[int, List[int]] = {}
    for pos, out in enumerate(graph.outputs):
        output_positions.setdefault(out, []).append(pos)

    consumers = graph.consumers()
    down: Dict[int, bytes] = {}
    for node_id in reversed(order):
        uses = sorted((up[c], down[c], p) for c, p in consumers[node_id])
        down[node_id] = _digest(up[node_id], tuple(uses), tuple(output_positions.get(node_id, ())))
    return {i: (up[i], down[i]) for i in order}


def canonical_order(graph: ComputationGraph) -> List[int]:
    """
    Topological order whose ties are broken by structural keys instead of ids
    """
    order = graph.topological_order()
    keys = _refined_keys(graph, order)

    indegree = {i: len(graph.nodes[i].inputs) for i in order}
    users: Dict[int, List[int]] = {i: [] for i in order}
    for node in graph.nodes.values():
        for src in node.inputs:
            users[src].append(node.id)

    # ids only break ties between structurally indistinguishable nodes
    ready = [(keys[i], i) for i in order if indegree[i] == 0]
    heapq.heapify(ready)
    result: List[int] = []
    while ready:
        _, current = heapq.heappop(ready)
        result.append(current)
        for user in users[current]:
            indegree[user] -= 1
            if indegree[user] == 0:
                heapq.heappush(ready, (keys[user], user))
    return result


def canonical_serialization(graph: ComputationGraph) -> List[Tuple]:
    """(kind, attrs, shape, canonical input positions) per node, then the outputs"""
    order = canonical_order(graph)
    position = {node_id: idx for idx, node_id in enumerate(order)}
    lines: List[Tuple] = []
    for node_id in order:
        node = graph.nodes[node_id]
        lines.append(_node_label(node, graph) + (tuple(position[i] for i in node.inputs),))
    lines.append(("outputs", tuple(position[o] for o in graph.outputs)))
    return lines


def canonical_hash(graph: ComputationGraph) -> int:
    """64-bit digest invariant under node-id relabeling and input renaming"""
    payload = repr(canonical_serialization(graph)).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
