"""JSON formats for type graphs, graphs, patterns, networks and change scripts.

All files are UTF-8.  A workspace directory holds:

``typegraph.json``
    ``{"node_types": [...], "edge_types": [...]}``
``patterns.json``
    ``{"<pattern name>": {"nodes", "edges", "negated", "marking"}}``
``network.json``
    ``{"modules": [...], "wires": [...], "cycles": [...]}``
``graph.json``
    snapshot ``{"typegraph"?, "next_id", "nodes", "edges"}``
``script.jsonl``
    one change event per line; consecutive lines sharing a ``batch`` value
    form one maintenance batch, a line without ``batch`` is a batch alone.

The field names are documented in README.md.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import NetworkError, ParseError
from .graph import (
    ATTRIBUTE_CHANGED,
    BASE,
    EDGE_ADDED,
    EDGE_REMOVED,
    EVENT_KINDS,
    NODE_CREATED,
    NODE_DELETED,
    ChangeEvent,
    Edge,
    EdgeTypeDef,
    Graph,
    Node,
    NodeTypeDef,
    TypeGraph,
)
from .network import Connector, Cycle, Network, ViewModule, Wire, build_network, infer_inputs
from .pattern import AttrPredicate, MarkingSpec, Pattern, PatternEdge, PatternNode, RoleSpec

WORKSPACE_FILES = {
    "typegraph": "typegraph.json",
    "patterns": "patterns.json",
    "network": "network.json",
    "graph": "graph.json",
    "script": "script.jsonl",
}


def _read_json(path: Path | str) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(path), f"cannot read: {exc.strerror or exc}") from None
    return parse_json(text, str(path))


def parse_json(text: str, source: str = "<string>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, exc.msg, exc.lineno, exc.colno) from None


def _write_json(path: Path | str, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


class _Reader:
    """Field access that turns structural problems into ParseErrors."""

    def __init__(self, source: str):
        self.source = source

    def get(self, obj: Any, key: str, kind=None, default: Any = ...):
        if not isinstance(obj, dict):
            raise ParseError(self.source, f"expected an object holding {key!r}")
        if key not in obj:
            if default is ...:
                raise ParseError(self.source, f"missing field {key!r}")
            return default
        value = obj[key]
        if kind is not None and value is not None and not isinstance(value, kind):
            raise ParseError(self.source, f"field {key!r} has the wrong JSON type")
        return value


# -- type graphs ----------------------------------------------------------


def typegraph_to_dict(tg: TypeGraph) -> dict:
    return {
        "node_types": [
            {"name": nt.name, "supertype": nt.supertype, "layer": nt.layer, "attributes": [list(a) for a in nt.attributes]}
            for nt in tg.node_types.values()
        ],
        "edge_types": [
            {"name": et.name, "source": et.source_type, "target": et.target_type, "layer": et.layer}
            for et in tg.edge_types.values()
            if et.layer != "scope"
        ],
    }


def typegraph_from_dict(d: Mapping, source: str = "<typegraph>") -> TypeGraph:
    r = _Reader(source)
    nodes = []
    for nt in r.get(d, "node_types", list):
        attrs = r.get(nt, "attributes", (list, dict), [])
        if isinstance(attrs, dict):
            attrs = list(attrs.items())
        nodes.append(
            NodeTypeDef(r.get(nt, "name", str), r.get(nt, "supertype", str, None), r.get(nt, "layer", str, BASE), tuple(tuple(a) for a in attrs))
        )
    edges = [
        EdgeTypeDef(r.get(et, "name", str), r.get(et, "source", str), r.get(et, "target", str), r.get(et, "layer", str, BASE))
        for et in r.get(d, "edge_types", list)
    ]
    return TypeGraph(nodes, edges)


# -- graphs ---------------------------------------------------------------


def graph_to_dict(graph: Graph, *, with_typegraph: bool = True) -> dict:
    nodes = []
    for n in sorted(graph.nodes.values(), key=lambda n: n.id):
        d: dict[str, Any] = {"id": n.id, "type": n.type, "attrs": dict(n.attrs)}
        if n.view:
            d["module"] = n.module
            if n.obsolete:
                d["obsolete"] = True
            if n.former:
                d["former"] = [list(f) for f in n.former]
        nodes.append(d)
    edges = [
        {"id": e.id, "type": e.type, "src": e.src, "dst": e.dst, "layer": e.layer}
        for e in sorted(graph.edges.values(), key=lambda e: e.id)
    ]
    out: dict[str, Any] = {}
    if with_typegraph:
        out["typegraph"] = typegraph_to_dict(graph.typegraph)
    out["next_id"] = graph.next_id
    out["nodes"] = nodes
    out["edges"] = edges
    return out


def graph_from_dict(d: Mapping, typegraph: TypeGraph | None = None, source: str = "<graph>") -> Graph:
    r = _Reader(source)
    if "typegraph" in d:
        tg = typegraph_from_dict(d["typegraph"], source)
        if typegraph is not None and tg != typegraph:
            raise ParseError(source, "embedded type graph differs from the workspace type graph")
        typegraph = typegraph or tg
    if typegraph is None:
        raise ParseError(source, "no type graph given")
    g = Graph(typegraph)
    # stored content is trusted apart from referential checks, so that
    # snapshots taken between phases (dangling view edges) load as well
    for nd in r.get(d, "nodes", list, []):
        nid = g._claim(r.get(nd, "id", int))
        t = r.get(nd, "type", str)
        nt = typegraph.node_type(t)
        view = nt.layer != BASE
        former = tuple((f[0], f[1]) for f in r.get(nd, "former", list, []))
        g._insert_node(
            Node(nid, t, dict(r.get(nd, "attrs", dict, {})), r.get(nd, "module", str, None) if view else None,
                 bool(r.get(nd, "obsolete", bool, False)), former, view)
        )
    for ed in r.get(d, "edges", list, []):
        eid = g._claim(r.get(ed, "id", int))
        t = r.get(ed, "type", str)
        et = typegraph.edge_type(t)
        src, dst = r.get(ed, "src", int), r.get(ed, "dst", int)
        if src not in g.nodes:
            raise ParseError(source, f"edge {eid} starts at unknown node {src}")
        if et.layer == BASE and dst not in g.nodes:
            raise ParseError(source, f"base edge {eid} ends at unknown node {dst}")
        g._insert_edge(Edge(eid, t, src, dst, r.get(ed, "layer", str, et.layer)))
    g.next_id = max(g.next_id, r.get(d, "next_id", int, 1))
    return g


def save_snapshot(graph: Graph, path: Path | str) -> None:
    _write_json(path, graph_to_dict(graph))


def load_snapshot(path: Path | str, typegraph: TypeGraph | None = None) -> Graph:
    return graph_from_dict(_read_json(path), typegraph, str(path))


def graphs_equal(a: Graph, b: Graph) -> bool:
    """Structural equality of everything a snapshot records."""
    return graph_to_dict(a) == graph_to_dict(b)


# -- patterns -------------------------------------------------------------


def pattern_to_dict(p: Pattern) -> dict:
    nodes = []
    for n in p.nodes:
        d: dict[str, Any] = {"var": n.var, "type": n.type}
        if n.input is not None:
            d["input"] = n.input
        if n.predicates:
            d["where"] = [[q.attr, q.op, q.value] for q in n.predicates]
        nodes.append(d)
    out: dict[str, Any] = {
        "nodes": nodes,
        "edges": [{"source": e.source, "target": e.target, "type": e.type} for e in p.edges],
        "negated": {"nodes": sorted(p.negated_nodes), "edges": sorted(p.negated_edges)},
    }
    if p.marking is not None:
        m = p.marking
        out["marking"] = {
            "marker": m.marker_type,
            "roles": [{"edge": r.edge_type, "var": r.var, "identity": r.identity} for r in m.roles],
            "scopes": list(m.scoped),
        }
    return out


def pattern_from_dict(d: Mapping, source: str = "<pattern>") -> Pattern:
    r = _Reader(source)
    nodes = []
    for nd in r.get(d, "nodes", list):
        preds = tuple(AttrPredicate(*q) for q in r.get(nd, "where", list, []))
        nodes.append(PatternNode(r.get(nd, "var", str), r.get(nd, "type", str), r.get(nd, "input", str, None), preds))
    edges = tuple(
        PatternEdge(r.get(e, "source", str), r.get(e, "target", str), r.get(e, "type", str)) for e in r.get(d, "edges", list, [])
    )
    neg = r.get(d, "negated", dict, {})
    marking = None
    md = r.get(d, "marking", dict, None)
    if md is not None:
        roles = tuple(
            RoleSpec(r.get(x, "edge", str), r.get(x, "var", str), r.get(x, "identity", bool, True)) for x in r.get(md, "roles", list)
        )
        marking = MarkingSpec(r.get(md, "marker", str), roles, tuple(r.get(md, "scopes", list, [])))
    return Pattern(
        tuple(nodes), edges, frozenset(r.get(neg, "nodes", list, [])), frozenset(r.get(neg, "edges", list, [])), marking
    )


# -- networks -------------------------------------------------------------


def network_to_dict(net: Network, pattern_names: Mapping[str, str] | None = None) -> dict:
    """Network definition; ``pattern_names`` maps module name to pattern name."""
    names = pattern_names or {}
    return {
        "modules": [
            {
                "name": m.name,
                "pattern": names.get(m.name, m.name),
                "inputs": [
                    {"name": c.name, "type": c.type, **({"negative": True} if c.negative else {})} for c in m.inputs
                ],
            }
            for m in net.modules.values()
        ],
        "wires": [{"producer": w.producer, "consumer": w.consumer, "input": w.input} for w in net.wires],
        "cycles": [
            {"modules": sorted(c.modules), **({"fixpoint": c.fixpoint} if c.fixpoint else {})} for c in net.cycles
        ],
    }


def network_from_dict(d: Mapping, typegraph: TypeGraph, patterns: Mapping[str, Pattern], source: str = "<network>") -> Network:
    r = _Reader(source)
    modules = []
    for md in r.get(d, "modules", list):
        name = r.get(md, "name", str)
        pname = r.get(md, "pattern", str, name)
        if pname not in patterns:
            raise NetworkError(f"module {name!r} references unknown pattern {pname!r}")
        pat = patterns[pname]
        ins = r.get(md, "inputs", list, None)
        if ins is None:
            inputs = infer_inputs(pat, typegraph)
        else:
            inputs = tuple(
                Connector(r.get(c, "name", str), r.get(c, "type", str), bool(r.get(c, "negative", bool, False))) for c in ins
            )
        modules.append(ViewModule(name, pat, inputs))
    wires = [
        Wire(r.get(w, "producer", str), r.get(w, "consumer", str), r.get(w, "input", str)) for w in r.get(d, "wires", list, [])
    ]
    cycles = [
        Cycle(frozenset(r.get(c, "modules", list)), r.get(c, "fixpoint", str, None)) for c in r.get(d, "cycles", list, [])
    ]
    return build_network(typegraph, modules, wires, cycles)


# -- change scripts -------------------------------------------------------

_EVENT_FIELDS = ("node", "edge", "type", "src", "dst", "attrs", "attr", "value")


def event_to_dict(ev: ChangeEvent) -> dict:
    req = ev.request()
    d: dict[str, Any] = {"kind": req.kind}
    for f in _EVENT_FIELDS:
        v = getattr(req, f)
        if v is not None or (f == "value" and req.kind == ATTRIBUTE_CHANGED):
            d[f] = v
    if req.batch is not None:
        d["batch"] = req.batch
    return d


def event_from_dict(d: Any, source: str = "<event>", line: int | None = None) -> ChangeEvent:
    if not isinstance(d, dict):
        raise ParseError(source, "an event must be a JSON object", line)
    kind = d.get("kind")
    if kind not in EVENT_KINDS:
        raise ParseError(source, f"unknown event kind {kind!r}", line)
    required = {
        NODE_CREATED: ("type",),
        NODE_DELETED: ("node",),
        EDGE_ADDED: ("type", "src", "dst"),
        EDGE_REMOVED: ("edge",),
        ATTRIBUTE_CHANGED: ("node", "attr", "value"),
    }[kind]
    for f in required:
        if f not in d:
            raise ParseError(source, f"{kind} event lacks {f!r}", line)
    extra = set(d) - set(_EVENT_FIELDS) - {"kind", "batch"}
    if extra:
        raise ParseError(source, f"unknown event fields {sorted(extra)}", line)
    return ChangeEvent(kind, **{f: d.get(f) for f in _EVENT_FIELDS}, batch=d.get("batch")).request()


def write_script(path: Path | str, events: Iterable[ChangeEvent]) -> None:
    lines = [json.dumps(event_to_dict(ev), ensure_ascii=False) for ev in events]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def parse_script(text: str, source: str = "<script>") -> list[ChangeEvent]:
    events = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(source, exc.msg, i, exc.colno) from None
        events.append(event_from_dict(d, source, i))
    return events


def read_script(path: Path | str) -> list[ChangeEvent]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(path), f"cannot read: {exc.strerror or exc}") from None
    return parse_script(text, str(path))


def group_batches(events: Iterable[ChangeEvent]) -> list[list[ChangeEvent]]:
    batches: list[list[ChangeEvent]] = []
    last = object()
    for ev in events:
        if ev.batch is None or ev.batch != last or not batches:
            batches.append([ev])
        else:
            batches[-1].append(ev)
        last = ev.batch if ev.batch is not None else object()
    return batches


def replay(graph: Graph, events: Iterable[ChangeEvent]) -> list[ChangeEvent]:
    """Apply logged events; cascade removals are re-derived by their node deletion."""
    out = []
    for ev in events:
        if ev.kind == EDGE_REMOVED and (ev.snapshot or {}).get("cascade"):
            continue
        out.append(graph.apply(ev.request()))
    return out


class ScriptPlayer:
    """Applies script batches to a graph that is being maintained.

    Markers draw ids from the same counter as base elements, so an id a
    script creates may already belong to a marker.  Such ids are replaced by
    fresh ones and later references follow the replacement.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self.ids: dict[int, int] = {}

    @property
    def inverse(self) -> dict[int, int]:
        """Actual ids back to script ids."""
        return {v: k for k, v in self.ids.items()}

    def _map(self, ident):
        return self.ids.get(ident, ident)

    def _fresh(self, ident):
        if ident is None:
            return None
        g = self.graph
        if ident in g.nodes or ident in g.edges or ident in self.ids:
            new = g.fresh_id()
            self.ids[ident] = new
            return new
        return ident

    def play(self, events: Iterable[ChangeEvent]) -> list[ChangeEvent]:
        out = []
        for ev in events:
            if ev.kind == EDGE_REMOVED and (ev.snapshot or {}).get("cascade"):
                continue
            req = ev.request()
            if req.kind == NODE_CREATED:
                req.node = self._fresh(req.node)
            elif req.kind == EDGE_ADDED:
                req.edge = self._fresh(req.edge)
                req.src, req.dst = self._map(req.src), self._map(req.dst)
            elif req.kind == EDGE_REMOVED:
                req.edge = self._map(req.edge)
            else:
                req.node = self._map(req.node)
            out.append(self.graph.apply(req))
        return out


# -- workspaces -----------------------------------------------------------


@dataclass
class Workspace:
    typegraph: TypeGraph
    graph: Graph
    network: Network
    script: list[ChangeEvent] = field(default_factory=list)
    patterns: dict[str, Pattern] = field(default_factory=dict)
    pattern_of: dict[str, str] = field(default_factory=dict)

    @property
    def batches(self) -> list[list[ChangeEvent]]:
        return group_batches(self.script)


def load_workspace(paths: Path | str | Mapping[str, Path | str]) -> Workspace:
    """Load a workspace from a directory or from a mapping of file paths.

    A missing graph file means an empty graph, a missing script an empty one.
    """
    if isinstance(paths, Mapping):
        files = {k: Path(v) for k, v in paths.items() if v is not None}
    else:
        root = Path(paths)
        if not root.is_dir():
            raise ParseError(str(root), "workspace directory not found")
        files = {k: root / v for k, v in WORKSPACE_FILES.items()}
    for key in ("typegraph", "patterns", "network"):
        if key not in files or not files[key].exists():
            raise ParseError(str(files.get(key, key)), "missing workspace file")
    tg = typegraph_from_dict(_read_json(files["typegraph"]), str(files["typegraph"]))
    raw = _read_json(files["patterns"])
    if not isinstance(raw, dict):
        raise ParseError(str(files["patterns"]), "patterns file must hold an object")
    patterns = {name: pattern_from_dict(p, f"{files['patterns']}:{name}") for name, p in raw.items()}
    ndict = _read_json(files["network"])
    net = network_from_dict(ndict, tg, patterns, str(files["network"]))
    pattern_of = {m["name"]: m.get("pattern", m["name"]) for m in ndict["modules"]}
    gpath = files.get("graph")
    if gpath is not None and gpath.exists():
        graph = graph_from_dict(_read_json(gpath), tg, str(gpath))
    else:
        graph = Graph(tg)
    spath = files.get("script")
    script = read_script(spath) if spath is not None and spath.exists() else []
    return Workspace(tg, graph, net, script, patterns, pattern_of)


def save_workspace(ws: Workspace, directory: Path | str) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / WORKSPACE_FILES["typegraph"], typegraph_to_dict(ws.typegraph))
    pats = ws.patterns or {m.name: m.pattern for m in ws.network.modules.values()}
    _write_json(root / WORKSPACE_FILES["patterns"], {k: pattern_to_dict(p) for k, p in pats.items()})
    _write_json(root / WORKSPACE_FILES["network"], network_to_dict(ws.network, ws.pattern_of))
    _write_json(root / WORKSPACE_FILES["graph"], graph_to_dict(ws.graph, with_typegraph=False))
    write_script(root / WORKSPACE_FILES["script"], ws.script)


def workspace_path(name: str) -> Path:
    """Resolve a workspace argument; ``builtin:<name>`` selects shipped data."""
    if name.startswith("builtin:"):
        return Path(__file__).parent / "data" / name.split(":", 1)[1]
    return Path(os.path.expanduser(name))
