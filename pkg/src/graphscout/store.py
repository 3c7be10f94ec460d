"""In-memory property-graph store for indicator knowledge networks.

Nodes are persons, behavioral indicators, organizations, and countries;
edges attach indicators to persons, link persons socially, and record
affiliations and locations. Relationships carry calendar-date timestamps
at day resolution (stored internally as days since 1970-01-01).

Persistence is line-oriented JSON, one self-describing record per line:

    {"t":"node","id":"p1","kind":"Person","attrs":{"name":"A"}}
    {"t":"edge","src":"p1","dst":"i1","kind":"HAS_INDICATOR","ts":"2015-03-05"}

Concurrency follows a single-writer / multi-reader model: ``GraphStore``
serializes mutations and hands out immutable snapshot copies identified
by their version for querying.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

from .taxonomy import IndicatorTaxonomy

_EPOCH = dt.date(1970, 1, 1)


def date_to_days(d: dt.date) -> int:
    """Calendar date -> days since 1970-01-01."""
    return (d - _EPOCH).days


def days_to_date(days: int) -> dt.date:
    return _EPOCH + dt.timedelta(days=days)


def parse_iso_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class GraphError(Exception):
    """Base class for graph-store failures."""


class DuplicateIdError(GraphError):
    pass


class MissingRequiredAttrError(GraphError):
    pass


class UnknownCategoryError(GraphError):
    pass


class DanglingEndpointError(GraphError):
    pass


class IllegalEdgeKindError(GraphError):
    pass


class UnknownNodeError(GraphError):
    pass


class MalformedRecordError(GraphError):
    """A persistence record that cannot be decoded. Carries its line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IntegrityViolationError(GraphError):
    """A decodable record that violates graph integrity on load."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

class NodeKind(str, Enum):
    PERSON = "Person"
    INDICATOR = "Indicator"
    ORGANIZATION = "Organization"
    COUNTRY = "Country"


class EdgeKind(str, Enum):
    HAS_INDICATOR = "HAS_INDICATOR"
    KNOWS = "KNOWS"
    AFFILIATED_WITH = "AFFILIATED_WITH"
    LOCATED_IN = "LOCATED_IN"


# Legal (source kind, destination kind) per edge kind.
EDGE_ENDPOINTS: dict[EdgeKind, tuple[NodeKind, NodeKind]] = {
    EdgeKind.HAS_INDICATOR: (NodeKind.PERSON, NodeKind.INDICATOR),
    EdgeKind.KNOWS: (NodeKind.PERSON, NodeKind.PERSON),
    EdgeKind.AFFILIATED_WITH: (NodeKind.PERSON, NodeKind.ORGANIZATION),
    EdgeKind.LOCATED_IN: (NodeKind.PERSON, NodeKind.COUNTRY),
}

# Mandatory attributes per node kind.
REQUIRED_ATTRS: dict[NodeKind, tuple[str, ...]] = {
    NodeKind.PERSON: ("name",),
    NodeKind.INDICATOR: ("category",),
}


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    attrs: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind
    ts: int | None = None  # days since epoch, day resolution

    def ts_date(self) -> dt.date | None:
        return None if self.ts is None else days_to_date(self.ts)


class KnowledgeGraph:
    """Typed property graph with versioned mutations.

    Repeated HAS_INDICATOR edges are kept (same person, same category,
    different dates = repeated behavior); every other edge kind is
    deduplicated, with KNOWS treated as an unordered pair.
    """

    def __init__(self, taxonomy: IndicatorTaxonomy | None = None):
        self.taxonomy = taxonomy or IndicatorTaxonomy.default()
        self._nodes: dict[str, Node] = {}
        self._edges: list[Edge] = []
        # adjacency: node id -> edge kind -> neighbor ids (directed as stored)
        self._out: dict[str, dict[EdgeKind, list[Edge]]] = {}
        self._in: dict[str, dict[EdgeKind, list[Edge]]] = {}
        self._dedup_keys: set[tuple] = set()
        self.version = 0

    # -- introspection ------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def nodes(self) -> Iterator[Node]:
        return iter(self._nodes.values())

    def edges(self) -> Iterator[Edge]:
        return iter(self._edges)

    def persons(self) -> list[str]:
        """Person node ids in ascending id order."""
        return sorted(n.id for n in self._nodes.values() if n.kind is NodeKind.PERSON)

    def display_name(self, node_id: str) -> str:
        node = self.node(node_id)
        return node.attrs.get("name", node.id)

    # -- mutation -----------------------------------------------------------

    def add_node(self, node: Node) -> str:
        """Insert a node, enforcing kind-specific required attributes.

        Returns the node id. Raises DuplicateIdError, MissingRequiredAttrError,
        or UnknownCategoryError.
        """
        if not node.id:
            raise MalformedRecordError(0, "node id must be nonempty")
        if node.id in self._nodes:
            raise DuplicateIdError(f"node {node.id!r} already present")
        for attr in REQUIRED_ATTRS.get(node.kind, ()):
            if attr not in node.attrs:
                raise MissingRequiredAttrError(
                    f"{node.kind.value} node {node.id!r} missing attr {attr!r}"
                )
        if node.kind is NodeKind.INDICATOR:
            category = node.attrs["category"]
            if category not in self.taxonomy:
                raise UnknownCategoryError(
                    f"node {node.id!r}: category {category!r} not in taxonomy"
                )
        self._nodes[node.id] = node
        self._bump()
        return node.id

    def add_edge(self, edge: Edge) -> None:
        """Insert an edge after endpoint and kind checks.

        Deduplicated kinds silently no-op on re-insertion (no version bump).
        Raises DanglingEndpointError or IllegalEdgeKindError.
        """
        for endpoint in (edge.src, edge.dst):
            if endpoint not in self._nodes:
                raise DanglingEndpointError(f"edge endpoint {endpoint!r} not in graph")
        want_src, want_dst = EDGE_ENDPOINTS[edge.kind]
        got_src = self._nodes[edge.src].kind
        got_dst = self._nodes[edge.dst].kind
        if (got_src, got_dst) != (want_src, want_dst):
            raise IllegalEdgeKindError(
                f"{edge.kind.value} requires {want_src.value}->{want_dst.value}, "
                f"got {got_src.value}->{got_dst.value}"
            )
        if edge.kind is not EdgeKind.HAS_INDICATOR:
            if edge.kind is EdgeKind.KNOWS:
                key = (edge.kind, frozenset((edge.src, edge.dst)))
            else:
                key = (edge.kind, edge.src, edge.dst)
            if key in self._dedup_keys:
                return
            self._dedup_keys.add(key)
        self._edges.append(edge)
        self._out.setdefault(edge.src, {}).setdefault(edge.kind, []).append(edge)
        self._in.setdefault(edge.dst, {}).setdefault(edge.kind, []).append(edge)
        self._bump()

    def _bump(self) -> None:
        self.version += 1

    # -- traversal ----------------------------------------------------------

    def out_edges(self, node_id: str, kind: EdgeKind) -> list[Edge]:
        return list(self._out.get(node_id, {}).get(kind, []))

    def neighbors(self, start: str, edge_kind: EdgeKind, radius: int) -> set[str]:
        """Nodes reachable from `start` within `radius` hops of `edge_kind`.

        KNOWS is traversed undirected; other kinds follow edge direction.
        The start node itself is excluded. Raises UnknownNodeError.
        """
        if start not in self._nodes:
            raise UnknownNodeError(f"unknown node {start!r}")
        if radius < 1:
            raise ValueError("radius must be >= 1")
        seen = {start}
        frontier = deque([(start, 0)])
        while frontier:
            node_id, depth = frontier.popleft()
            if depth == radius:
                continue
            step = [e.dst for e in self._out.get(node_id, {}).get(edge_kind, [])]
            if edge_kind is EdgeKind.KNOWS:
                step += [e.src for e in self._in.get(node_id, {}).get(edge_kind, [])]
            for nxt in step:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append((nxt, depth + 1))
        seen.discard(start)
        return seen

    # -- matcher support ----------------------------------------------------

    def indicator_events(self, person_id: str) -> dict[str, list[int | None]]:
        """category -> timestamps of the person's HAS_INDICATOR edges."""
        events: dict[str, list[int | None]] = {}
        for edge in self._out.get(person_id, {}).get(EdgeKind.HAS_INDICATOR, []):
            category = self._nodes[edge.dst].attrs["category"]
            events.setdefault(category, []).append(edge.ts)
        return events

    def linked_names(self, person_id: str, kind: EdgeKind) -> set[str]:
        """Display names of nodes the person points to via `kind`."""
        return {
            self.display_name(e.dst)
            for e in self._out.get(person_id, {}).get(kind, [])
        }

    # -- copying ------------------------------------------------------------

    def copy(self) -> "KnowledgeGraph":
        """Independent copy sharing the immutable Node/Edge records."""
        dup = KnowledgeGraph(self.taxonomy)
        dup._nodes = dict(self._nodes)
        dup._edges = list(self._edges)
        dup._out = {n: {k: list(es) for k, es in kinds.items()} for n, kinds in self._out.items()}
        dup._in = {n: {k: list(es) for k, es in kinds.items()} for n, kinds in self._in.items()}
        dup._dedup_keys = set(self._dedup_keys)
        dup.version = self.version
        return dup

    def check_integrity(self) -> None:
        """Raise IntegrityViolationError if any edge endpoint dangles."""
        for edge in self._edges:
            if edge.src not in self._nodes or edge.dst not in self._nodes:
                raise IntegrityViolationError(0, f"dangling edge {edge.src!r}->{edge.dst!r}")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def node_to_record(node: Node) -> dict:
    return {"t": "node", "id": node.id, "kind": node.kind.value, "attrs": dict(node.attrs)}


def edge_to_record(edge: Edge) -> dict:
    ts = None if edge.ts is None else days_to_date(edge.ts).isoformat()
    return {"t": "edge", "src": edge.src, "dst": edge.dst, "kind": edge.kind.value, "ts": ts}


def _record_from_line(line_no: int, line: str) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from None
    if not isinstance(record, dict):
        raise MalformedRecordError(line_no, "record must be a JSON object")
    return record

def _parse_record(line_no: int, record: dict) -> Node | Edge:
    tag = record.get("t")
    if tag == "node":
        try:
            kind = NodeKind(record["kind"])
        except (KeyError, ValueError):
            raise MalformedRecordError(line_no, f"unknown node kind {record.get('kind')!r}") from None
        node_id = record.get("id")
        attrs = record.get("attrs", {})
        if not isinstance(node_id, str) or not node_id:
            raise MalformedRecordError(line_no, "node id must be a nonempty string")
        if not isinstance(attrs, dict):
            raise MalformedRecordError(line_no, "node attrs must be an object")
        return Node(node_id, kind, {str(k): str(v) for k, v in attrs.items()})
    if tag == "edge":
        try:
            kind = EdgeKind(record["kind"])
        except (KeyError, ValueError):
            raise MalformedRecordError(line_no, f"unknown edge kind {record.get('kind')!r}") from None
        src, dst = record.get("src"), record.get("dst")
        if not isinstance(src, str) or not isinstance(dst, str):
            raise MalformedRecordError(line_no, "edge src/dst must be strings")
        raw_ts = record.get("ts")
        if raw_ts is None:
            ts = None
        else:
            try:
                ts = date_to_days(parse_iso_date(raw_ts))
            except (TypeError, ValueError):
                raise MalformedRecordError(line_no, f"bad edge timestamp {raw_ts!r}") from None
        return Edge(src, dst, kind, ts)
    raise MalformedRecordError(line_no, f"unknown record tag {tag!r}")


def save_graph(graph: KnowledgeGraph, sink: str | Path | IO[str]) -> None:
    """Write the graph as line-oriented records: nodes (by id), then edges."""

    def _write(fh: IO[str]) -> None:
        for node in sorted(graph.nodes(), key=lambda n: n.id):
            fh.write(json.dumps(node_to_record(node), ensure_ascii=False) + "\n")
        for edge in graph.edges():
            fh.write(json.dumps(edge_to_record(edge), ensure_ascii=False) + "\n")

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(sink)


def load_graph(
    source: str | Path | IO[str] | Iterable[str],
    taxonomy: IndicatorTaxonomy | None = None,
) -> KnowledgeGraph:
    """Load a graph file; inverse of save_graph up to the version counter.

    Node records are applied before edge records regardless of file order,
    so bulk dumps may interleave. The loaded version is node+edge count.
    Raises MalformedRecordError or IntegrityViolationError with the
    offending line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)

    parsed: list[tuple[int, Node | Edge]] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parsed.append((line_no, _parse_record(line_no, _record_from_line(line_no, line))))

    graph = KnowledgeGraph(taxonomy)
    for line_no, item in parsed:
        if isinstance(item, Node):
            try:
                graph.add_node(item)
            except GraphError as exc:
                raise IntegrityViolationError(line_no, str(exc)) from None
    for line_no, item in parsed:
        if isinstance(item, Edge):
            try:
                graph.add_edge(item)
            except GraphError as exc:
                raise IntegrityViolationError(line_no, str(exc)) from None
    graph.version = graph.node_count + graph.edge_count
    return graph


# ---------------------------------------------------------------------------
# Bulk ingestion and the single-writer store
# ---------------------------------------------------------------------------

@dataclass
class IngestReport:
    nodes_added: int = 0
    edges_added: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "nodes_added": self.nodes_added,
            "edges_added": self.edges_added,
            "errors": [{"line": ln, "message": msg} for ln, msg in self.errors],
        }


def ingest_lines(graph: KnowledgeGraph, lines: Iterable[str]) -> IngestReport:
    """Apply graph-file lines to `graph` best-effort.

    Each line is atomic: a bad line is reported with its line number and
    skipped, the rest still apply. Mutates `graph` in place.
    """
    report = IngestReport()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            item = _parse_record(line_no, _record_from_line(line_no, line))
            if isinstance(item, Node):
                graph.add_node(item)
                report.nodes_added += 1
            else:
                before = graph.edge_count
                graph.add_edge(item)
                if graph.edge_count > before:
                    report.edges_added += 1
        except GraphError as exc:
            report.errors.append((line_no, str(exc)))
    return report


class GraphStore:
    """Single-writer / multi-reader wrapper around a KnowledgeGraph.

    Mutations are serialized behind a lock; readers get immutable snapshot
    copies and may keep using them while later writes land. A bulk ingest
    is applied to a working copy and swapped in with a single version bump,
    so concurrent readers see either the pre- or post-ingest graph, never
    a half-applied one.
    """

    def __init__(self, graph: KnowledgeGraph | None = None):
        self._graph = graph if graph is not None else KnowledgeGraph()
        self._lock = threading.Lock()

    @property
    def version(self) -> int:
        with self._lock:
            return self._graph.version

    def snapshot(self) -> KnowledgeGraph:
        with self._lock:
            return self._graph.copy()

    def ingest(self, lines: Iterable[str]) -> IngestReport:
        lines = list(lines)
        with self._lock:
            work = self._graph.copy()
            report = ingest_lines(work, lines)
            if report.nodes_added or report.edges_added:
                work.version = self._graph.version + 1
                self._graph = work
        return report

    def save(self, sink: str | Path | IO[str]) -> None:
        save_graph(self.snapshot(), sink)
