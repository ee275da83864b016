"""
Graph Serialization - Lossless JSON graph documents
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import BaseModel, Field, ValidationError

from graphdream.exceptions import MalformedGraph
from graphdream.graph.ir import ComputationGraph, Node, OpKind
from graphdream.graph.shapes import infer_shapes

FORMAT_VERSION = 1

AttrValue = Union[int, float, List[Any]]


class NodeDocument(BaseModel):
    """One node: id, kind, attrs, inputs"""
    id: int
    kind: OpKind
    inputs: List[int] = Field(default_factory=list)
    attrs: Dict[str, AttrValue] = Field(default_factory=dict)


class GraphDocument(BaseModel):
    """Whole-graph document"""
    format_version: int = FORMAT_VERSION
    name: str = "graph"
    nodes: List[NodeDocument]
    outputs: List[int]


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def graph_to_document(graph: ComputationGraph, name: str = "graph") -> GraphDocument:
    return GraphDocument(
        name=name,
        nodes=[
            NodeDocument(id=n.id, kind=n.kind, inputs=list(n.inputs),
                         attrs={k: _plain(v) for k, v in sorted(n.attrs.items())})
            for n in graph.nodes.values()
        ],
        outputs=list(graph.outputs),
    )


def document_to_graph(document: GraphDocument) -> ComputationGraph:
    nodes = {}
    for doc in document.nodes:
        if doc.id in nodes:
            raise MalformedGraph(f"duplicate node id {doc.id}")
        nodes[doc.id] = Node(doc.id, doc.kind, tuple(doc.inputs), doc.attrs)
    return infer_shapes(ComputationGraph(nodes, tuple(document.outputs)))


def dumps_graph(graph: ComputationGraph, name: str = "graph") -> str:
    return json.dumps(graph_to_document(graph, name).model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def loads_graph(text: str) -> ComputationGraph:
    try:
        document = GraphDocument.model_validate_json(text)
    except ValidationError as e:
        raise MalformedGraph(f"invalid graph document: {e}") from e
    return document_to_graph(document)


def save_graph(graph: ComputationGraph, path: Path, name: str = "graph") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_graph(graph, name))
    return path


def load_graph(path: Path) -> ComputationGraph:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"graph file not found: {path}")
    return loads_graph(path.read_text())
