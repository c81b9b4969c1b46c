"""Typed property graphs with a base layer and a view layer.

The base layer holds domain data.  The view layer holds *marker* nodes, each
standing for one pattern match, wired to the matched nodes by typed role
edges or by untyped scope edges.  Every view edge points from a marker to the
node it marks, so the markers of a node are found by walking its incoming
view edges backwards.

Base mutations go through :func:`apply_change` and are recorded in the
graph's pending change log; the view layer is written only by the
maintenance machinery through the ``new_marker``/``link``/``unlink``/
``drop_marker`` methods, which are not logged.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator

from .errors import (
    DuplicateIdError,
    GraphBusyError,
    TypeGraphError,
    TypeMismatchError,
    UnknownElementError,
    UnknownTypeError,
)

BASE = "base"
VIEW = "view"
ROLE = "view-role"
SCOPE_LAYER = "scope"
SCOPE = "scope"  # name of the single, untyped scope edge kind

VALUE_KINDS = ("string", "integer", "boolean")

NODE_CREATED = "node-created"
NODE_DELETED = "node-deleted"
EDGE_ADDED = "edge-added"
EDGE_REMOVED = "edge-removed"
ATTRIBUTE_CHANGED = "attribute-changed"
EVENT_KINDS = (NODE_CREATED, NODE_DELETED, EDGE_ADDED, EDGE_REMOVED, ATTRIBUTE_CHANGED)


@dataclass(frozen=True)
class NodeTypeDef:
    name: str
    supertype: str | None = None
    layer: str = BASE
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class EdgeTypeDef:
    name: str
    source_type: str | None
    target_type: str | None
    layer: str = BASE


class TypeGraph:
    """Node and edge type hierarchy shared by base and view layers."""

    def __init__(self, node_types: Iterable[NodeTypeDef] = (), edge_types: Iterable[EdgeTypeDef] = ()):
        self.node_types: dict[str, NodeTypeDef] = {}
        self.edge_types: dict[str, EdgeTypeDef] = {}
        for nt in node_types:
            if nt.name in self.node_types:
                raise TypeGraphError(f"duplicate node type {nt.name!r}")
            self.node_types[nt.name] = nt
        self.edge_types[SCOPE] = EdgeTypeDef(SCOPE, None, None, SCOPE_LAYER)
        for et in edge_types:
            if et.name in self.edge_types:
                raise TypeGraphError(f"duplicate edge type {et.name!r}")
            self.edge_types[et.name] = et
        self._validate()
        self._ancestors = {name: self._chain(name) for name in self.node_types}
        self._subtypes: dict[str, frozenset[str]] = {}
        for name in self.node_types:
            self._subtypes[name] = frozenset(n for n, chain in self._ancestors.items() if name in chain)
        self._attrs = {name: self._collect_attrs(name) for name in self.node_types}

    def _validate(self) -> None:
        for nt in self.node_types.values():
            if nt.layer not in (BASE, VIEW):
                raise TypeGraphError(f"node type {nt.name!r} has bad layer {nt.layer!r}")
            for _, kind in nt.attributes:
                if kind not in VALUE_KINDS:
                    raise TypeGraphError(f"node type {nt.name!r}: bad attribute kind {kind!r}")
            if nt.supertype is not None:
                sup = self.node_types.get(nt.supertype)
                if sup is None:
                    raise TypeGraphError(f"node type {nt.name!r}: unknown supertype {nt.supertype!r}")
                if sup.layer != nt.layer:
                    raise TypeGraphError(f"node type {nt.name!r} and its supertype live in different layers")
        for name in self.node_types:
            seen = set()
            cur: str | None = name
            while cur is not None:
                if cur in seen:
                    raise TypeGraphError(f"cyclic supertype chain through {name!r}")
                seen.add(cur)
                cur = self.node_types[cur].supertype
        for et in self.edge_types.values():
            if et.name == SCOPE:
                continue
            if et.layer not in (BASE, ROLE):
                raise TypeGraphError(f"edge type {et.name!r} has bad layer {et.layer!r}")
            for end in (et.source_type, et.target_type):
                if end not in self.node_types:
                    raise TypeGraphError(f"edge type {et.name!r}: unknown endpoint type {end!r}")
            src_layer = self.node_types[et.source_type].layer
            if et.layer == BASE and (src_layer != BASE or self.node_types[et.target_type].layer != BASE):
                raise TypeGraphError(f"base edge type {et.name!r} must connect base node types")
            if et.layer == ROLE and src_layer != VIEW:
                raise TypeGraphError(f"role edge type {et.name!r} needs a view-layer source type")

    def _chain(self, name: str) -> tuple[str, ...]:
        out = []
        cur: str | None = name
        while cur is not None:
            out.append(cur)
            cur = self.node_types[cur].supertype
        return tuple(out)

    def _collect_attrs(self, name: str) -> dict[str, str]:
        attrs: dict[str, str] = {}
        for t in reversed(self._ancestors[name]):
            attrs.update(dict(self.node_types[t].attributes))
        return attrs

    def node_type(self, name: str) -> NodeTypeDef:
        try:
            return self.node_types[name]
        except KeyError:
            raise UnknownTypeError(name) from None

    def edge_type(self, name: str) -> EdgeTypeDef:
        try:
            return self.edge_types[name]
        except KeyError:
            raise UnknownTypeError(name, "edge") from None

    def ancestors(self, name: str) -> tuple[str, ...]:
        """The type itself followed by its transitive supertypes."""
        self.node_type(name)
        return self._ancestors[name]

    def subtypes(self, name: str) -> frozenset[str]:
        """All types conforming to ``name`` (reflexive)."""
        self.node_type(name)
        return self._subtypes[name]

    def conforms(self, actual: str, required: str | None) -> bool:
        if required is None:
            return True
        chain = self._ancestors.get(actual)
        if chain is None:
            raise UnknownTypeError(actual)
        if required not in self.node_types:
            raise UnknownTypeError(required)
        return required in chain

    def attributes(self, name: str) -> dict[str, str]:
        self.node_type(name)
        return self._attrs[name]

    def layer(self, name: str) -> str:
        return self.node_type(name).layer

    def common_supertype(self, names: Iterable[str]) -> str | None:
        names = list(names)
        if not names:
            return None
        for candidate in self.ancestors(names[0]):
            if all(candidate in self.ancestors(n) for n in names[1:]):
                return candidate
        return None

    def extended(self, node_types: Iterable[NodeTypeDef] = (), edge_types: Iterable[EdgeTypeDef] = ()) -> TypeGraph:
        """Return a new type graph with extra types appended."""
        return TypeGraph(
            list(self.node_types.values()) + list(node_types),
            [et for et in self.edge_types.values() if et.name != SCOPE] + list(edge_types),
        )

    def __eq__(self, other):
        if not isinstance(other, TypeGraph):
            return NotImplemented
        return self.node_types == other.node_types and self.edge_types == other.edge_types

    __hash__ = object.__hash__


def type_conforms(typegraph: TypeGraph, actual: NodeTypeDef | str, required: NodeTypeDef | str) -> bool:
    """True iff ``actual`` equals ``required`` or has it as transitive supertype."""
    a = actual if isinstance(actual, str) else actual.name
    r = required if isinstance(required, str) else required.name
    return typegraph.conforms(a, r)


@dataclass(eq=False)
class Node:
    id: int
    type: str
    attrs: dict[str, Any] = field(default_factory=dict)
    module: str | None = None
    obsolete: bool = False
    # (edge type, target) pairs stripped by an Update that failed the marker
    former: tuple[tuple[str, int], ...] = ()
    view: bool = False


@dataclass(eq=False)
class Edge:
    id: int
    type: str
    src: int
    dst: int
    layer: str = BASE


@dataclass
class ChangeEvent:
    """One atomic change.

    ``snapshot`` is filled in by :func:`apply_change` for deletions:
    for nodes it records type, attributes, incident edges and the view
    nodes marking the deleted node, so look-ups still work once it is gone.
    """

    kind: str
    node: int | None = None
    edge: int | None = None
    type: str | None = None
    src: int | None = None
    dst: int | None = None
    attrs: dict[str, Any] | None = None
    attr: str | None = None
    value: Any = None
    old: Any = None
    snapshot: dict[str, Any] | None = None
    batch: int | None = None

    def request(self) -> ChangeEvent:
        """The event stripped of everything apply_change fills in."""
        if self.kind == NODE_CREATED:
            return ChangeEvent(self.kind, node=self.node, type=self.type, attrs=dict(self.attrs or {}), batch=self.batch)
        if self.kind == NODE_DELETED:
            return ChangeEvent(self.kind, node=self.node, batch=self.batch)
        if self.kind == EDGE_ADDED:
            return ChangeEvent(self.kind, edge=self.edge, type=self.type, src=self.src, dst=self.dst, batch=self.batch)
        if self.kind == EDGE_REMOVED:
            return ChangeEvent(self.kind, edge=self.edge, batch=self.batch)
        return ChangeEvent(self.kind, node=self.node, attr=self.attr, value=self.value, batch=self.batch)


class Graph:
    """Store of typed nodes and edges, partitioned into base and view layers."""

    def __init__(self, typegraph: TypeGraph):
        self.typegraph = typegraph
        self.nodes: dict[int, Node] = {}
        self.edges: dict[int, Edge] = {}
        self._out: dict[int, dict[int, Edge]] = {}
        self._in: dict[int, dict[int, Edge]] = {}
        self._by_type: dict[str, set[int]] = {}
        self.next_id = 1
        self.log: list[ChangeEvent] = []
        self.busy = False

    # -- queries -------------------------------------------------------

    def __contains__(self, nid) -> bool:
        return nid in self.nodes

    def node(self, nid: int) -> Node:
        try:
            return self.nodes[nid]
        except KeyError:
            raise UnknownElementError(nid) from None

    def out_edges(self, nid: int) -> Iterable[Edge]:
        d = self._out.get(nid)
        return d.values() if d else ()

    def in_edges(self, nid: int) -> Iterable[Edge]:
        d = self._in.get(nid)
        return d.values() if d else ()

    def has_edge(self, src: int, dst: int, etype: str) -> bool:
        d = self._out.get(src)
        if not d:
            return False
        for e in d.values():
            if e.dst == dst and e.type == etype:
                return True
        return False

    def nodes_of_type(self, type_name: str) -> set[int]:
        """Ids of all nodes conforming to ``type_name``."""
        out: set[int] = set()
        for t in self.typegraph.subtypes(type_name):
            ids = self._by_type.get(t)
            if ids:
                out |= ids
        return out

    def count_of_type(self, type_name: str) -> int:
        return sum(len(self._by_type.get(t, ())) for t in self.typegraph.subtypes(type_name))

    def count_exact(self, type_name: str) -> int:
        return len(self._by_type.get(type_name, ()))

    def markers(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.view)

    def base_node_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if not n.view)

    def is_dangling(self, edge: Edge) -> bool:
        return edge.dst not in self.nodes

    def dangling_markers(self) -> set[int]:
        return {e.src for e in self.edges.values() if e.dst not in self.nodes}

    def marked_targets(self, marker: int) -> list[tuple[str, int]]:
        return [(e.type, e.dst) for e in self.out_edges(marker)]

    # -- change intake -------------------------------------------------

    def fresh_id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def apply(self, change: ChangeEvent) -> ChangeEvent:
        return apply_change(self, change)

    def add_node(self, type_name: str, **attrs) -> int:
        return self.apply(ChangeEvent(NODE_CREATED, type=type_name, attrs=attrs)).node

    def add_edge(self, type_name: str, src: int, dst: int) -> int:
        return self.apply(ChangeEvent(EDGE_ADDED, type=type_name, src=src, dst=dst)).edge

    def remove_edge(self, eid: int) -> ChangeEvent:
        return self.apply(ChangeEvent(EDGE_REMOVED, edge=eid))

    def delete_node(self, nid: int) -> ChangeEvent:
        return self.apply(ChangeEvent(NODE_DELETED, node=nid))

    def set_attr(self, nid: int, attr: str, value) -> ChangeEvent:
        return self.apply(ChangeEvent(ATTRIBUTE_CHANGED, node=nid, attr=attr, value=value))

    def find_edge(self, src: int, dst: int, etype: str) -> int | None:
        for e in self.out_edges(src):
            if e.dst == dst and e.type == etype:
                return e.id
        return None

    def drain(self) -> list[ChangeEvent]:
        """Hand out and clear the pending change log."""
        events, self.log = self.log, []
        return events

    # -- raw storage ---------------------------------------------------

    def _claim(self, ident: int | None) -> int:
        if ident is None:
            return self.fresh_id()
        if not isinstance(ident, int) or isinstance(ident, bool):
            raise TypeMismatchError(f"ids must be integers, got {ident!r}")
        if ident in self.nodes or ident in self.edges:
            raise DuplicateIdError(ident)
        self.next_id = max(self.next_id, ident + 1)
        return ident

    def _insert_node(self, node: Node) -> None:
        self.nodes[node.id] = node
        self._by_type.setdefault(node.type, set()).add(node.id)

    def _insert_edge(self, edge: Edge) -> None:
        self.edges[edge.id] = edge
        self._out.setdefault(edge.src, {})[edge.id] = edge
        self._in.setdefault(edge.dst, {})[edge.id] = edge

    def _drop_edge(self, eid: int) -> Edge:
        edge = self.edges.pop(eid)
        d = self._out[edge.src]
        del d[eid]
        if not d:
            del self._out[edge.src]
        d = self._in[edge.dst]
        del d[eid]
        if not d:
            del self._in[edge.dst]
        return edge

    def _drop_node(self, nid: int) -> Node:
        node = self.nodes.pop(nid)
        ids = self._by_type[node.type]
        ids.discard(nid)
        if not ids:
            del self._by_type[node.type]
        return node

    # -- view layer (engine-owned, unlogged) --------------------------

    def new_marker(self, type_name: str, module: str) -> Node:
        nt = self.typegraph.node_type(type_name)
        if nt.layer != VIEW:
            raise TypeMismatchError(f"marker type {type_name!r} is not a view type")
        node = Node(self.fresh_id(), type_name, {}, module=module, view=True)
        self._insert_node(node)
        return node

    def link(self, marker: int, etype: str, target: int) -> Edge:
        et = self.typegraph.edge_type(etype)
        src = self.node(marker)
        dst = self.node(target)
        if et.layer == BASE:
            raise TypeMismatchError(f"{etype!r} is not a view edge type")
        if not src.view:
            raise TypeMismatchError("view edges must start at a view node")
        if not self.typegraph.conforms(src.type, et.source_type) or not self.typegraph.conforms(dst.type, et.target_type):
            raise TypeMismatchError(f"{etype!r} cannot connect {src.type} to {dst.type}")
        edge = Edge(self.fresh_id(), etype, marker, target, et.layer)
        self._insert_edge(edge)
        return edge

    def unlink(self, eid: int) -> Edge:
        return self._drop_edge(eid)

    def drop_marker(self, nid: int) -> Node:
        node = self.node(nid)
        if not node.view:
            raise TypeMismatchError(f"node {nid} is not a view node")
        for e in list(self.out_edges(nid)):
            self._drop_edge(e.id)
        return self._drop_node(nid)

    # -- copies --------------------------------------------------------

    def copy(self, typegraph: TypeGraph | None = None, *, base_only: bool = False) -> Graph:
        g = Graph(typegraph or self.typegraph)
        for n in sorted(self.nodes.values(), key=lambda n: n.id):
            if base_only and n.view:
                continue
            g._insert_node(replace(n, attrs=dict(n.attrs)))
        for e in sorted(self.edges.values(), key=lambda e: e.id):
            if base_only and e.layer != BASE:
                continue
            g._insert_edge(replace(e))
        g.next_id = self.next_id
        return g


def backward_marks(graph: Graph, node_id: int) -> set[int]:
    """View nodes owning a role edge or scope that targets ``node_id``.

    Works for deleted nodes too, as long as the markers' edges still dangle
    towards them.
    """
    return {e.src for e in graph.in_edges(node_id) if e.layer != BASE}


def _check_attr(graph: Graph, type_name: str, attr: str, value) -> None:
    kinds = graph.typegraph.attributes(type_name)
    if attr not in kinds:
        raise TypeMismatchError(f"type {type_name!r} has no attribute {attr!r}")
    kind = kinds[attr]
    if kind == "string":
        ok = isinstance(value, str)
    elif kind == "integer":
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, bool)
    if not ok:
        raise TypeMismatchError(f"attribute {type_name}.{attr} expects {kind}, got {value!r}")


def apply_change(graph: Graph, change: ChangeEvent) -> ChangeEvent:
    """Mutate ``graph`` by one change and log the enriched event.

    Deleting a node first removes its base edges (and, for view nodes, their
    own outgoing view edges), logging one ``edge-removed`` event per edge.
    View edges pointing *at* the deleted node are left dangling; the Delete
    phase of maintenance resolves them.
    """
    if graph.busy:
        raise GraphBusyError("graph is being maintained; changes are not accepted")
    tg = graph.typegraph
    ev = replace(change)
    kind = ev.kind
    if kind == NODE_CREATED:
        nt = tg.node_type(ev.type)
        if nt.layer != BASE:
            raise TypeMismatchError(f"view-layer nodes are engine-owned ({ev.type!r})")
        attrs = dict(ev.attrs or {})
        for k, v in attrs.items():
            _check_attr(graph, ev.type, k, v)
        ev.node = graph._claim(ev.node)
        ev.attrs = attrs
        graph._insert_node(Node(ev.node, ev.type, dict(attrs)))
        graph.log.append(ev)
    elif kind == EDGE_ADDED:
        et = tg.edge_type(ev.type)
        if et.layer != BASE:
            raise TypeMismatchError(f"view-layer edges are engine-owned ({ev.type!r})")
        src, dst = graph.node(ev.src), graph.node(ev.dst)
        if not tg.conforms(src.type, et.source_type) or not tg.conforms(dst.type, et.target_type):
            raise TypeMismatchError(
                f"edge {ev.type!r} expects {et.source_type}->{et.target_type}, got {src.type}->{dst.type}"
            )
        ev.edge = graph._claim(ev.edge)
        graph._insert_edge(Edge(ev.edge, ev.type, ev.src, ev.dst, BASE))
        graph.log.append(ev)
    elif kind == EDGE_REMOVED:
        edge = graph.edges.get(ev.edge)
        if edge is None:
            raise UnknownElementError(ev.edge, "edge")
        if edge.layer != BASE:
            raise TypeMismatchError("view-layer edges are engine-owned")
        _remove_edge_logged(graph, edge, ev.batch, template=ev)
    elif kind == NODE_DELETED:
        node = graph.node(ev.node)
        incident = []
        for e in list(graph.out_edges(node.id)) + list(graph.in_edges(node.id)):
            if e.layer == BASE or e.src == node.id:
                incident.append(e)
        incident.sort(key=lambda e: e.id)
        snapshot = {
            "type": node.type,
            "attrs": dict(node.attrs),
            "view": node.view,
            "module": node.module,
            "edges": [[e.id, e.type, e.src, e.dst] for e in incident],
            "neighbors": sorted({e.dst if e.src == node.id else e.src for e in incident if e.layer == BASE}),
            "marks": sorted({e.dst for e in incident if e.layer != BASE}),
            "marked_by": sorted(backward_marks(graph, node.id)),
        }
        for e in incident:
            _remove_edge_logged(graph, e, ev.batch)
        graph._drop_node(node.id)
        ev.type = node.type
        ev.snapshot = snapshot
        graph.log.append(ev)
    elif kind == ATTRIBUTE_CHANGED:
        node = graph.node(ev.node)
        if node.view:
            raise TypeMismatchError("view-layer nodes carry no attributes")
        _check_attr(graph, node.type, ev.attr, ev.value)
        ev.old = node.attrs.get(ev.attr)
        ev.type = node.type
        node.attrs[ev.attr] = ev.value
        graph.log.append(ev)
    else:
        raise ValueError(f"unknown change kind {kind!r}")
    return ev


def _remove_edge_logged(graph: Graph, edge: Edge, batch, template: ChangeEvent | None = None) -> ChangeEvent:
    graph._drop_edge(edge.id)
    ev = template or ChangeEvent(EDGE_REMOVED, edge=edge.id, batch=batch)
    ev.type, ev.src, ev.dst = edge.type, edge.src, edge.dst
    ev.snapshot = {"layer": edge.layer, "cascade": template is None}
    graph.log.append(ev)
    return ev


def iter_view_edges(graph: Graph) -> Iterator[Edge]:
    return (e for e in graph.edges.values() if e.layer != BASE)
