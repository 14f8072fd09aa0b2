"""Portable network documents: canonical JSON plus a dot-language export.

A document captures an inferred network by event name: edge list with
optional per-edge confidence, one probability table per event, and run
metadata.  Serialization is canonical (fixed key layout, sorted metadata,
no NaN), so export -> import -> export is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from sbcn._version import __version__
from sbcn.data import Cpt, Dag, Network, ParseError, SchemaError
from sbcn.evaluate import EdgeConfidence

__all__ = [
    "SCHEMA_VERSION",
    "DocumentCpt",
    "DocumentEdge",
    "NetworkDocument",
    "document_to_network",
    "from_network",
    "load_document",
    "parse_document",
    "render_document",
    "save_document",
    "to_dot",
]

SCHEMA_VERSION = 1

_SCALAR_TYPES = (str, int, float, bool, type(None))


@dataclass(frozen=True)
class DocumentEdge:
    parent: str
    child: str
    confidence: "float | None" = None

    def __post_init__(self) -> None:
        if self.parent == self.child:
            raise SchemaError("self-loop edge in document")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise SchemaError("edge confidence must lie in [0, 1]")


@dataclass(frozen=True)
class DocumentCpt:
    """Probability table keyed by parent names in ascending event order."""

    event: str
    parents: tuple[str, ...]
    p_one: tuple[float, ...]
    zero_support: tuple[bool, ...]

    def __post_init__(self) -> None:
        expected = 2 ** len(self.parents)
        if len(self.p_one) != expected:
            raise SchemaError(
                f"table for {self.event!r} must have {expected} entries, "
                f"got {len(self.p_one)}"
            )
        if len(self.zero_support) != expected:
            raise SchemaError(f"zero_support arity mismatch for {self.event!r}")
        if any(not 0.0 <= p <= 1.0 for p in self.p_one):
            raise SchemaError(f"probabilities for {self.event!r} must lie in [0, 1]")


@dataclass(frozen=True)
class NetworkDocument:
    events: tuple[str, ...]
    edges: tuple[DocumentEdge, ...]
    cpts: tuple[DocumentCpt, ...]
    metadata: "dict[str, object]" = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.events:
            raise SchemaError("document must declare at least one event")
        if len(set(self.events)) != len(self.events):
            raise SchemaError("event names must be unique")
        index = {name: i for i, name in enumerate(self.events)}
        seen = set()
        for edge in self.edges:
            if edge.parent not in index or edge.child not in index:
                raise SchemaError(
                    f"edge {edge.parent!r} -> {edge.child!r} references "
                    "undeclared events"
                )
            if (edge.parent, edge.child) in seen:
                raise SchemaError(f"duplicate edge {edge.parent!r} -> {edge.child!r}")
            seen.add((edge.parent, edge.child))
        if self.cpts:
            if tuple(entry.event for entry in self.cpts) != self.events:
                raise SchemaError("cpts must list every event exactly once, in order")
            for entry in self.cpts:
                declared = tuple(
                    sorted(
                        (parent for parent, child in seen if child == entry.event),
                        key=index.__getitem__,
                    )
                )
                if entry.parents != declared:
                    raise SchemaError(
                        f"cpt parents for {entry.event!r} disagree with the edge list"
                    )
        for key, value in self.metadata.items():
            if not isinstance(key, str) or not isinstance(value, _SCALAR_TYPES):
                raise SchemaError("metadata must map strings to JSON scalars")

    def edge_index_pairs(self) -> "tuple[tuple[int, int], ...]":
        index = {name: i for i, name in enumerate(self.events)}
        return tuple(
            sorted((index[e.parent], index[e.child]) for e in self.edges)
        )


def from_network(
    network: Network,
    metadata: "dict[str, object] | None" = None,
    confidence: "EdgeConfidence | None" = None,
) -> NetworkDocument:
    """Snapshot a fitted network, optionally annotating bootstrap confidence."""
    names = network.event_names
    edges = []
    for parent, child in sorted(network.dag.edges):
        level = None
        if confidence is not None:
            level = confidence.confidence(parent, child)
        edges.append(
            DocumentEdge(parent=names[parent], child=names[child], confidence=level)
        )
    cpts = tuple(
        DocumentCpt(
            event=names[cpt.event],
            parents=tuple(names[p] for p in cpt.parents),
            p_one=tuple(float(p) for p in cpt.p_one),
            zero_support=tuple(bool(z) for z in cpt.zero_support),
        )
        for cpt in network.cpts
    )
    meta = {"tool_version": __version__}
    if metadata:
        meta.update(metadata)
    return NetworkDocument(
        events=tuple(names), edges=tuple(edges), cpts=cpts, metadata=meta
    )


def document_to_network(document: NetworkDocument) -> Network:
    """Rebuild the executable network; requires a full set of tables."""
    if not document.cpts:
        raise SchemaError("document carries no probability tables")
    index = {name: i for i, name in enumerate(document.events)}
    dag = Dag(
        node_count=len(document.events),
        edges=frozenset(document.edge_index_pairs()),
    )
    cpts = tuple(
        Cpt(
            event=index[entry.event],
            parents=tuple(index[p] for p in entry.parents),
            p_one=np.asarray(entry.p_one, dtype=np.float64),
            zero_support=np.asarray(entry.zero_support, dtype=bool),
        )
        for entry in document.cpts
    )
    return Network(dag=dag, cpts=cpts, event_names=document.events)


def render_document(document: NetworkDocument) -> str:
    """Canonical JSON text: fixed section order, metadata keys sorted."""
    index = {name: i for i, name in enumerate(document.events)}
    edges = []
    for edge in sorted(document.edges, key=lambda e: (index[e.parent], index[e.child])):
        payload: dict[str, object] = {"parent": edge.parent, "child": edge.child}
        if edge.confidence is not None:
            payload["confidence"] = edge.confidence
        edges.append(payload)
    body = {
        "schema_version": SCHEMA_VERSION,
        "events": list(document.events),
        "edges": edges,
        "cpts": [
            {
                "event": entry.event,
                "parents": list(entry.parents),
                "p_one": list(entry.p_one),
                "zero_support": list(entry.zero_support),
            }
            for entry in document.cpts
        ],
        "metadata": {key: document.metadata[key] for key in sorted(document.metadata)},
    }
    return json.dumps(body, indent=2, allow_nan=False) + "\n"


def parse_document(text: str) -> NetworkDocument:
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"document is not valid JSON: {exc}") from None
    if not isinstance(body, dict):
        raise SchemaError("document must be a JSON object")
    if body.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {body.get('schema_version')!r}; "
            f"expected {SCHEMA_VERSION}"
        )
    try:
        events = tuple(str(name) for name in body["events"])
        edges = tuple(
            DocumentEdge(
                parent=str(e["parent"]),
                child=str(e["child"]),
                confidence=None if "confidence" not in e else float(e["confidence"]),
            )
            for e in body["edges"]
        )
        cpts = tuple(
            DocumentCpt(
                event=str(c["event"]),
                parents=tuple(str(p) for p in c["parents"]),
                p_one=tuple(float(p) for p in c["p_one"]),
                zero_support=tuple(bool(z) for z in c["zero_support"]),
            )
            for c in body["cpts"]
        )
        metadata = dict(body.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed document: {exc}") from None
    return NetworkDocument(events=events, edges=edges, cpts=cpts, metadata=metadata)


def save_document(document: NetworkDocument, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(render_document(document))


def load_document(path) -> NetworkDocument:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_document(handle.read())


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(document: NetworkDocument, graph_name: str = "network") -> str:
    """Directed-graph text for visualization; confidences become edge labels."""
    index = {name: i for i, name in enumerate(document.events)}
    lines = [f"digraph {_dot_quote(graph_name)} {{"]
    for name in document.events:
        lines.append(f"  {_dot_quote(name)};")
    for edge in sorted(document.edges, key=lambda e: (index[e.parent], index[e.child])):
        attrs = ""
        if edge.confidence is not None:
            attrs = f' [label="{edge.confidence:.3f}"]'
        lines.append(f"  {_dot_quote(edge.parent)} -> {_dot_quote(edge.child)}{attrs};")
    lines.append("}")
    return "\n".join(lines) + "\n"
