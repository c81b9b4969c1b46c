"""Example type graphs, patterns, networks, fixtures and synthetic workloads.

The example domain is a slice of a Java abstract syntax graph: classes,
interfaces, members, type references.  Two networks are defined over it:

``running``
    Generalization, BoundedAssociation, UnboundedAssociation and Composite.
``design``
    ``running`` plus a recursive MultiLevelGeneralization module and an
    InterfaceImplementation / ExtractInterface pair joined by a negated
    marker node.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .graph import BASE, ROLE, VIEW, EdgeTypeDef, Graph, NodeTypeDef, TypeGraph
from .io import Workspace, save_workspace
from .network import Cycle, Network, ViewModule, Wire, build_network, infer_inputs
from .pattern import EQ, AttrPredicate, MarkingSpec, Pattern, PatternEdge, PatternNode, RoleSpec

NCR = "NamespaceClassifierReference"
CR = "ClassifierReference"


def example_typegraph() -> TypeGraph:
    name = (("name", "string"),)
    nodes = [
        NodeTypeDef("Classifier", None, BASE, name),
        NodeTypeDef("Class", "Classifier"),
        NodeTypeDef("Interface", "Classifier"),
        NodeTypeDef("Member", None, BASE, name),
        NodeTypeDef("Field", "Member"),
        NodeTypeDef("Method", "Member"),
        NodeTypeDef("Modifier"),
        NodeTypeDef("Public", "Modifier"),
        NodeTypeDef("Private", "Modifier"),
        NodeTypeDef("TypeReference"),
        NodeTypeDef(NCR, "TypeReference"),
        NodeTypeDef(CR, "TypeReference"),
        NodeTypeDef("ArrayDimension"),
        NodeTypeDef("QualifiedTypeArgument"),
        # view layer
        NodeTypeDef("Inheritance", None, VIEW),
        NodeTypeDef("Generalization", "Inheritance", VIEW),
        NodeTypeDef("MultiLevelGeneralization", "Generalization", VIEW),
        NodeTypeDef("InterfaceImplementation", "Inheritance", VIEW),
        NodeTypeDef("Association", None, VIEW),
        NodeTypeDef("BoundedAssociation", "Association", VIEW),
        NodeTypeDef("UnboundedAssociation", "Association", VIEW),
        NodeTypeDef("Composite", None, VIEW),
        NodeTypeDef("ExtractInterface", None, VIEW),
    ]
    edges = [
        EdgeTypeDef("members", "Classifier", "Member"),
        EdgeTypeDef("extends", "Class", "TypeReference"),
        EdgeTypeDef("implements", "Class", "TypeReference"),
        EdgeTypeDef("classifierReferences", NCR, CR),
        EdgeTypeDef("target", CR, "Classifier"),
        EdgeTypeDef("typeReference", "Field", "TypeReference"),
        EdgeTypeDef("argTypeReference", "QualifiedTypeArgument", "TypeReference"),
        EdgeTypeDef("arrayDimensions", "Field", "ArrayDimension"),
        EdgeTypeDef("typeArguments", CR, "QualifiedTypeArgument"),
        EdgeTypeDef("modifiers", "Method", "Modifier"),
        EdgeTypeDef("SubRole", "Inheritance", "Class", ROLE),
        EdgeTypeDef("SuperRole", "Inheritance", "Classifier", ROLE),
        EdgeTypeDef("LowerGen", "MultiLevelGeneralization", "Generalization", ROLE),
        EdgeTypeDef("UpperGen", "MultiLevelGeneralization", "Generalization", ROLE),
        EdgeTypeDef("Reference", "Association", "Field", ROLE),
        EdgeTypeDef("Target", "Association", "Classifier", ROLE),
        EdgeTypeDef("Composite", "Composite", "Class", ROLE),
        EdgeTypeDef("Component", "Composite", "Class", ROLE),
        EdgeTypeDef("Generalization", "Composite", "Generalization", ROLE),
        EdgeTypeDef("Association", "Composite", "Association", ROLE),
        EdgeTypeDef("Candidate", "ExtractInterface", "Class", ROLE),
    ]
    return TypeGraph(nodes, edges)


def _n(var, type_, input_=None, **where) -> PatternNode:
    return PatternNode(var, type_, input_, tuple(AttrPredicate(k, EQ, v) for k, v in where.items()))


def _e(src, dst, type_) -> PatternEdge:
    return PatternEdge(src, dst, type_)


def _roles(*pairs, loose=()) -> tuple[RoleSpec, ...]:
    return tuple(RoleSpec(t, v, identity=t not in loose) for t, v in pairs)


def example_patterns() -> dict[str, Pattern]:
    p: dict[str, Pattern] = {}
    p["Generalization"] = Pattern(
        (_n("sub", "Class", "Class"), _n("ncr", NCR, "TypeReference"), _n("cr", CR, "TypeReference"), _n("super", "Class", "Class")),
        (_e("sub", "ncr", "extends"), _e("ncr", "cr", "classifierReferences"), _e("cr", "super", "target")),
        marking=MarkingSpec("Generalization", _roles(("SubRole", "sub"), ("SuperRole", "super")), ("ncr", "cr")),
    )
    p["BoundedAssociation"] = Pattern(
        (
            _n("field", "Field", "Field"),
            _n("dim", "ArrayDimension", "ArrayDimension"),
            _n("ncr", NCR, "TypeReference"),
            _n("cr", CR, "TypeReference"),
            _n("elem", "Classifier", "Classifier"),
        ),
        (
            _e("field", "dim", "arrayDimensions"),
            _e("field", "ncr", "typeReference"),
            _e("ncr", "cr", "classifierReferences"),
            _e("cr", "elem", "target"),
        ),
        marking=MarkingSpec("BoundedAssociation", _roles(("Reference", "field"), ("Target", "elem")), ("dim", "ncr", "cr")),
    )
    p["UnboundedAssociation"] = Pattern(
        (
            _n("field", "Field", "Field"),
            _n("ncr1", NCR, "TypeReference"),
            _n("cr1", CR, "TypeReference"),
            _n("list", "Class", "Classifier", name="List"),
            _n("qta", "QualifiedTypeArgument", "QualifiedTypeArgument"),
            _n("ncr2", NCR, "TypeReference"),
            _n("cr2", CR, "TypeReference"),
            _n("elem", "Classifier", "Classifier"),
            _n("dim", "ArrayDimension"),
        ),
        (
            _e("field", "ncr1", "typeReference"),
            _e("ncr1", "cr1", "classifierReferences"),
            _e("cr1", "list", "target"),
            _e("cr1", "qta", "typeArguments"),
            _e("qta", "ncr2", "argTypeReference"),
            _e("ncr2", "cr2", "classifierReferences"),
            _e("cr2", "elem", "target"),
            _e("field", "dim", "arrayDimensions"),
        ),
        negated_nodes=frozenset({"dim"}),
        marking=MarkingSpec(
            "UnboundedAssociation",
            _roles(("Reference", "field"), ("Target", "elem")),
            ("ncr1", "cr1", "list", "qta", "ncr2", "cr2"),
        ),
    )
    p["Composite"] = Pattern(
        (
            _n("g", "Generalization", "Generalization"),
            _n("a", "Association", "Association"),
            _n("sub", "Class"),
            _n("super", "Class"),
            _n("field", "Field"),
        ),
        (
            _e("g", "sub", "SubRole"),
            _e("g", "super", "SuperRole"),
            _e("a", "field", "Reference"),
            _e("a", "super", "Target"),
            _e("sub", "field", "members"),
        ),
        marking=MarkingSpec(
            "Composite",
            _roles(("Composite", "sub"), ("Component", "super"), ("Generalization", "g"), ("Association", "a")),
            ("field",),
        ),
    )
    p["MultiLevelGeneralization"] = Pattern(
        (
            _n("g1", "Generalization", "Generalization"),
            _n("g2", "Generalization", "Generalization"),
            _n("sub", "Class"),
            _n("mid", "Class"),
            _n("super", "Class"),
        ),
        (
            _e("g1", "sub", "SubRole"),
            _e("g1", "mid", "SuperRole"),
            _e("g2", "mid", "SubRole"),
            _e("g2", "super", "SuperRole"),
        ),
        marking=MarkingSpec(
            "MultiLevelGeneralization",
            _roles(("SubRole", "sub"), ("SuperRole", "super"), ("LowerGen", "g1"), ("UpperGen", "g2"), loose=("LowerGen", "UpperGen")),
            ("mid",),
        ),
    )
    p["InterfaceImplementation"] = Pattern(
        (_n("c", "Class", "Class"), _n("ncr", NCR, "TypeReference"), _n("cr", CR, "TypeReference"), _n("i", "Interface", "Interface")),
        (_e("c", "ncr", "implements"), _e("ncr", "cr", "classifierReferences"), _e("cr", "i", "target")),
        marking=MarkingSpec("InterfaceImplementation", _roles(("SubRole", "c"), ("SuperRole", "i")), ("ncr", "cr")),
    )
    p["ExtractInterface"] = Pattern(
        (_n("c", "Class", "Class"), _n("m", "Method", "Method"), _n("p", "Public", "Modifier"), _n("ii", "InterfaceImplementation", "ii")),
        (_e("c", "m", "members"), _e("m", "p", "modifiers"), _e("ii", "c", "SubRole")),
        negated_nodes=frozenset({"ii"}),
        marking=MarkingSpec("ExtractInterface", _roles(("Candidate", "c")), ("m", "p")),
    )
    return p


RUNNING_MODULES = ("Generalization", "BoundedAssociation", "UnboundedAssociation", "Composite")
DESIGN_MODULES = RUNNING_MODULES + ("MultiLevelGeneralization", "InterfaceImplementation", "ExtractInterface")


def _modules(tg: TypeGraph, names) -> list[ViewModule]:
    pats = example_patterns()
    out = []
    for name in names:
        inputs = list(infer_inputs(pats[name], tg))
        out.append(ViewModule(name, pats[name], tuple(inputs)))
    return out


def running_network(tg: TypeGraph | None = None) -> Network:
    tg = tg or example_typegraph()
    wires = [
        Wire("Generalization", "Composite", "Generalization"),
        Wire("BoundedAssociation", "Composite", "Association"),
        Wire("UnboundedAssociation", "Composite", "Association"),
    ]
    return build_network(tg, _modules(tg, RUNNING_MODULES), wires)


def design_network(tg: TypeGraph | None = None) -> Network:
    tg = tg or example_typegraph()
    wires = [
        Wire("Generalization", "Composite", "Generalization"),
        Wire("BoundedAssociation", "Composite", "Association"),
        Wire("UnboundedAssociation", "Composite", "Association"),
        Wire("Generalization", "MultiLevelGeneralization", "Generalization"),
        Wire("MultiLevelGeneralization", "MultiLevelGeneralization", "Generalization"),
        Wire("InterfaceImplementation", "ExtractInterface", "ii"),
    ]
    cycles = [Cycle(frozenset({"MultiLevelGeneralization"}), "MultiLevelGeneralization")]
    return build_network(tg, _modules(tg, DESIGN_MODULES), wires, cycles)


NETWORKS: dict[str, Callable[[TypeGraph | None], Network]] = {"running": running_network, "design": design_network}


# -- hand-built fixtures ----------------------------------------------------


def add_reference(g: Graph, owner: int, edge: str, target: int) -> tuple[int, int]:
    """``owner -edge-> ncr -classifierReferences-> cr -target-> target``."""
    ncr = g.add_node(NCR)
    cr = g.add_node(CR)
    g.add_edge(edge, owner, ncr)
    g.add_edge("classifierReferences", ncr, cr)
    g.add_edge("target", cr, target)
    return ncr, cr


def composite_fixture(g: Graph | None = None, *, with_members: bool = True) -> tuple[Graph, dict[str, int]]:
    """A container class that extends a component class and holds an array
    of components: one Generalization, one BoundedAssociation, one Composite."""
    g = g if g is not None else Graph(example_typegraph())
    ids: dict[str, int] = {}
    ids["component"] = g.add_node("Class", name="Component")
    ids["container"] = g.add_node("Class", name="Container")
    ids["g_ncr"], ids["g_cr"] = add_reference(g, ids["container"], "extends", ids["component"])
    ids["field"] = g.add_node("Field", name="children")
    ids["dim"] = g.add_node("ArrayDimension")
    ids["dim_edge"] = g.add_edge("arrayDimensions", ids["field"], ids["dim"])
    ids["f_ncr"], ids["f_cr"] = add_reference(g, ids["field"], "typeReference", ids["component"])
    if with_members:
        ids["members_edge"] = g.add_edge("members", ids["container"], ids["field"])
    return g, ids


def chain_fixture(k: int, g: Graph | None = None) -> tuple[Graph, list[int]]:
    """Classes ``C0 .. Ck`` where ``C(i)`` extends ``C(i+1)``."""
    g = g if g is not None else Graph(example_typegraph())
    classes = [g.add_node("Class", name=f"C{i}") for i in range(k + 1)]
    for a, b in zip(classes, classes[1:]):
        add_reference(g, a, "extends", b)
    return g, classes


def extract_interface_fixture(g: Graph | None = None) -> tuple[Graph, dict[str, int]]:
    """A class with a public method and an interface it does not implement yet."""
    g = g if g is not None else Graph(example_typegraph())
    ids = {}
    ids["class"] = g.add_node("Class", name="Service")
    ids["method"] = g.add_node("Method", name="run")
    ids["public"] = g.add_node("Public")
    ids["interface"] = g.add_node("Interface", name="Runnable")
    g.add_edge("members", ids["class"], ids["method"])
    g.add_edge("modifiers", ids["method"], ids["public"])
    return g, ids


def unbounded_fixture(g: Graph | None = None) -> tuple[Graph, dict[str, int]]:
    """A field typed ``List<Element>``."""
    g = g if g is not None else Graph(example_typegraph())
    ids = {}
    ids["owner"] = g.add_node("Class", name="Owner")
    ids["list"] = g.add_node("Class", name="List")
    ids["elem"] = g.add_node("Class", name="Element")
    ids["field"] = g.add_node("Field", name="items")
    g.add_edge("members", ids["owner"], ids["field"])
    ids["ncr1"], ids["cr1"] = add_reference(g, ids["field"], "typeReference", ids["list"])
    ids["qta"] = g.add_node("QualifiedTypeArgument")
    g.add_edge("typeArguments", ids["cr1"], ids["qta"])
    ids["ncr2"], ids["cr2"] = add_reference(g, ids["qta"], "argTypeReference", ids["elem"])
    return g, ids


def running_workspace() -> Workspace:
    """Composite fixture lacking its ``members`` edge, plus a script that
    completes it, breaks the array type and restores it."""
    tg = example_typegraph()
    net = running_network(tg)
    g, ids = composite_fixture(Graph(tg), with_members=False)
    g.drain()
    work = g.copy()
    work.add_edge("members", ids["container"], ids["field"])
    script = _batch(work.drain(), 1)
    work.delete_node(ids["dim"])
    script += _batch(work.drain(), 2)
    dim = work.add_node("ArrayDimension")
    work.add_edge("arrayDimensions", ids["field"], dim)
    script += _batch(work.drain(), 3)
    return Workspace(tg, g, net, script)


def design_workspace() -> Workspace:
    tg = example_typegraph()
    net = design_network(tg)
    g = Graph(tg)
    composite_fixture(g)
    chain_fixture(4, g)
    _, ei = extract_interface_fixture(g)
    g.drain()
    work = g.copy()
    ncr, cr = add_reference(work, ei["class"], "implements", ei["interface"])
    script = _batch(work.drain(), 1)
    work.delete_node(ncr)
    script += _batch(work.drain(), 2)
    return Workspace(tg, g, net, script)


def _batch(events, number):
    for ev in events:
        ev.batch = number
    return [ev for ev in events if not (ev.kind == "edge-removed" and (ev.snapshot or {}).get("cascade"))]


def write_builtin(root: Path | str) -> None:
    """Write the shipped ``running`` and ``design`` workspaces under ``root``."""
    root = Path(root)
    save_workspace(running_workspace(), root / "running")
    save_workspace(design_workspace(), root / "design")


# -- synthetic workloads ------------------------------------------------------

OCCURRENCE_SIZES = {
    "Generalization": 4,
    "BoundedAssociation": 6,
    "UnboundedAssociation": 9,
    "Composite": 8,
    "InterfaceImplementation": 4,
    "ExtractInterface": 3,
}
# markers one occurrence of each kind yields
OCCURRENCE_MARKERS = {
    "Generalization": {"Generalization": 1},
    "BoundedAssociation": {"BoundedAssociation": 1},
    "UnboundedAssociation": {"UnboundedAssociation": 1},
    "Composite": {"Generalization": 1, "BoundedAssociation": 1, "Composite": 1},
    "InterfaceImplementation": {"InterfaceImplementation": 1},
    "ExtractInterface": {"ExtractInterface": 1},
}
DESIGN_ONLY = ("InterfaceImplementation", "ExtractInterface")


@dataclass
class SyntheticSpec:
    """Parameters of a generated workload.

    ``base_nodes`` is the exact base node count of the initial graph; the
    nodes not used by seeded occurrences are noise that cannot complete any
    pattern.  ``edge_density`` is noise edges per noise node.  Script edits
    create or repair occurrences with probability ``seed_rate`` and break
    them otherwise; a ``chaos`` share of edits are arbitrary well-typed
    changes inside one cluster.  Consecutive edits are grouped into batches
    of ``batch_size``.
    """

    seed: int = 1
    base_nodes: int = 100
    occurrences: dict[str, int] = field(default_factory=lambda: {"Generalization": 10})
    cluster_size: int = 40
    edge_density: float = 0.5
    seed_rate: float = 0.5
    chaos: float = 0.0
    script_length: int = 0
    batch_size: int = 1
    network: str = "running"


@dataclass
class Synthetic:
    workspace: Workspace
    truth: dict[str, int]
    clusters: list[list[int]]


class _Builder:
    def __init__(self, spec: SyntheticSpec, g: Graph):
        self.spec = spec
        self.g = g
        self.rng = random.Random(spec.seed)
        self.cluster_of: dict[int, int] = {}
        self.clusters: list[list[int]] = []
        # per occurrence: kind, cluster, node ids, base edge ids
        self.occurrences: list[dict] = []
        self.removed: list[tuple[str, int, int]] = []

    def node(self, cluster: int, type_: str, **attrs) -> int:
        nid = self.g.add_node(type_, **attrs)
        self.cluster_of[nid] = cluster
        self.clusters[cluster].append(nid)
        return nid

    def ref(self, cluster, owner, edge, target, edges):
        ncr = self.node(cluster, NCR)
        cr = self.node(cluster, CR)
        edges += [self.g.add_edge(edge, owner, ncr), self.g.add_edge("classifierReferences", ncr, cr), self.g.add_edge("target", cr, target)]
        return [ncr, cr]

    def occurrence(self, kind: str, cluster: int) -> dict:
        g, n = self.g, self.node
        tag = len(self.occurrences)
        nodes: list[int] = []
        edges: list[int] = []
        if kind == "Generalization":
            sub, sup = n(cluster, "Class", name=f"S{tag}"), n(cluster, "Class", name=f"P{tag}")
            nodes = [sub, sup] + self.ref(cluster, sub, "extends", sup, edges)
        elif kind in ("BoundedAssociation", "Composite"):
            owner = n(cluster, "Class", name=f"O{tag}")
            elem = n(cluster, "Class", name=f"E{tag}")
            fld = n(cluster, "Field", name=f"f{tag}")
            dim = n(cluster, "ArrayDimension")
            edges += [g.add_edge("members", owner, fld), g.add_edge("arrayDimensions", fld, dim)]
            nodes = [owner, elem, fld, dim] + self.ref(cluster, fld, "typeReference", elem, edges)
            if kind == "Composite":
                nodes += self.ref(cluster, owner, "extends", elem, edges)
        elif kind == "UnboundedAssociation":
            owner = n(cluster, "Class", name=f"O{tag}")
            lst = n(cluster, "Class", name="List")
            elem = n(cluster, "Class", name=f"E{tag}")
            fld = n(cluster, "Field", name=f"f{tag}")
            qta = n(cluster, "QualifiedTypeArgument")
            edges.append(g.add_edge("members", owner, fld))
            r1 = self.ref(cluster, fld, "typeReference", lst, edges)
            edges.append(g.add_edge("typeArguments", r1[1], qta))
            nodes = [owner, lst, elem, fld, qta] + r1 + self.ref(cluster, qta, "argTypeReference", elem, edges)
        elif kind == "InterfaceImplementation":
            c, i = n(cluster, "Class", name=f"C{tag}"), n(cluster, "Interface", name=f"I{tag}")
            nodes = [c, i] + self.ref(cluster, c, "implements", i, edges)
        elif kind == "ExtractInterface":
            c, m, p = n(cluster, "Class", name=f"C{tag}"), n(cluster, "Method", name=f"m{tag}"), n(cluster, "Public")
            edges += [g.add_edge("members", c, m), g.add_edge("modifiers", m, p)]
            nodes = [c, m, p]
        else:
            raise ValueError(f"unknown occurrence kind {kind!r}")
        occ = {"kind": kind, "cluster": cluster, "nodes": nodes, "edges": edges}
        self.occurrences.append(occ)
        return occ

    def noise(self, cluster: int) -> int:
        t = self.rng.choice(("Class", "Field", "Method", "Private", NCR, CR))
        if t in ("Class", "Field", "Method"):
            return self.node(cluster, t, name=f"n{len(self.cluster_of)}")
        return self.node(cluster, t)

    def noise_edge(self, cluster: int) -> None:
        # only edge kinds that cannot complete any pattern
        members = self.clusters[cluster]
        ty = {nid: self.g.nodes[nid].type for nid in members if nid in self.g.nodes}
        kind = self.rng.choice(("members", "modifiers", "classifierReferences"))
        if kind == "members":
            src = [v for v in ty if ty[v] == "Class"]
            dst = [v for v in ty if ty[v] in ("Field", "Method") and not any(True for _ in self.g.in_edges(v))]
        elif kind == "modifiers":
            src = [v for v in ty if ty[v] == "Method"]
            dst = [v for v in ty if ty[v] == "Private"]
        else:
            src = [v for v in ty if ty[v] == NCR and not any(True for _ in self.g.in_edges(v))]
            dst = [v for v in ty if ty[v] == CR and not any(True for _ in self.g.out_edges(v)) and not any(True for _ in self.g.in_edges(v))]
        if src and dst:
            a, b = self.rng.choice(src), self.rng.choice(dst)
            if a != b and not self.g.has_edge(a, b, kind):
                self.g.add_edge(kind, a, b)


def _cluster_count(spec: SyntheticSpec) -> int:
    return max(1, round(spec.base_nodes / max(1, spec.cluster_size)))


def generate_synthetic(spec: SyntheticSpec) -> Synthetic:
    """Deterministic workspace with a known number of seeded occurrences."""
    for k, v in spec.occurrences.items():
        if k not in OCCURRENCE_SIZES:
            raise ValueError(f"unknown occurrence kind {k!r}")
        if v < 0:
            raise ValueError("occurrence counts must be non-negative")
        if spec.network == "running" and k in DESIGN_ONLY and v:
            raise ValueError(f"{k} occurrences need the design network")
    if spec.base_nodes < 0 or spec.script_length < 0:
        raise ValueError("counts must be non-negative")
    tg = example_typegraph()
    net = NETWORKS[spec.network](tg)
    g = Graph(tg)
    b = _Builder(spec, g)
    nclusters = _cluster_count(spec)
    b.clusters = [[] for _ in range(nclusters)]
    truth: dict[str, int] = {m.marker_type: 0 for m in net.modules.values()}
    for kind in sorted(spec.occurrences):
        for _ in range(spec.occurrences[kind]):
            b.occurrence(kind, b.rng.randrange(nclusters))
            for t, c in OCCURRENCE_MARKERS[kind].items():
                truth[t] += c
    noise_nodes = max(0, spec.base_nodes - len(g.nodes))
    for i in range(noise_nodes):
        b.noise(i % nclusters)
    for i in range(int(noise_nodes * spec.edge_density)):
        b.noise_edge(b.rng.randrange(nclusters))
    g.drain()
    script = _script(b, spec)
    ws = Workspace(tg, g, net, script)
    return Synthetic(ws, truth, [list(c) for c in b.clusters])


def _script(b: _Builder, spec: SyntheticSpec):
    if spec.script_length == 0:
        return []
    initial = b.g
    work = initial.copy()
    b.g = work
    rng = b.rng
    script = []
    for i in range(spec.script_length):
        r = rng.random()
        if r < spec.chaos:
            _chaos_edit(b)
        elif r < spec.chaos + (1 - spec.chaos) * spec.seed_rate:
            _constructive_edit(b, spec)
        else:
            _destructive_edit(b)
        events = work.drain()
        if not events:
            # every edit must change something; fall back to a fresh class
            b.node(rng.randrange(len(b.clusters)), "Class", name=f"x{i}")
            events = work.drain()
        script += _batch(events, i // max(1, spec.batch_size) + 1)
    b.g = initial
    return script


def _kinds(spec: SyntheticSpec) -> list[str]:
    kinds = ["Generalization", "BoundedAssociation", "UnboundedAssociation", "Composite"]
    if spec.network == "design":
        kinds += list(DESIGN_ONLY)
    return kinds


def _constructive_edit(b: _Builder, spec: SyntheticSpec) -> None:
    g = b.g
    if b.removed and b.rng.random() < 0.5:
        etype, src, dst = b.removed.pop(b.rng.randrange(len(b.removed)))
        if src in g.nodes and dst in g.nodes and not g.has_edge(src, dst, etype):
            g.add_edge(etype, src, dst)
            return
    b.occurrence(b.rng.choice(_kinds(spec)), b.rng.randrange(len(b.clusters)))


def _destructive_edit(b: _Builder) -> None:
    g = b.g
    live = [o for o in b.occurrences if any(e in g.edges for e in o["edges"])]
    if not live:
        return
    occ = b.rng.choice(live)
    r = b.rng.random()
    if r < 0.6:
        eid = b.rng.choice([e for e in occ["edges"] if e in g.edges])
        e = g.edges[eid]
        b.removed.append((e.type, e.src, e.dst))
        g.remove_edge(eid)
    elif r < 0.85:
        nodes = [v for v in occ["nodes"] if v in g.nodes]
        if nodes:
            g.delete_node(b.rng.choice(nodes))
    else:
        classes = [v for v in occ["nodes"] if v in g.nodes and g.nodes[v].type == "Class"]
        if classes:
            v = b.rng.choice(classes)
            g.set_attr(v, "name", "List" if g.nodes[v].attrs.get("name") != "List" else "Array")


def _chaos_edit(b: _Builder) -> None:
    g = b.g
    tg = g.typegraph
    ci = b.rng.randrange(len(b.clusters))
    members = [v for v in b.clusters[ci] if v in g.nodes]
    r = b.rng.random()
    if r < 0.5 and members:
        ets = sorted(n for n, et in tg.edge_types.items() if et.layer == BASE)
        etype = b.rng.choice(ets)
        et = tg.edge_types[etype]
        src = [v for v in members if tg.conforms(g.nodes[v].type, et.source_type)]
        dst = [v for v in members if tg.conforms(g.nodes[v].type, et.target_type)]
        if src and dst:
            a, c = b.rng.choice(src), b.rng.choice(dst)
            if a != c and not g.has_edge(a, c, etype):
                g.add_edge(etype, a, c)
    elif r < 0.7 and members:
        edges = sorted({e.id for v in members for e in g.out_edges(v) if e.layer == BASE})
        if edges:
            eid = b.rng.choice(edges)
            e = g.edges[eid]
            b.removed.append((e.type, e.src, e.dst))
            g.remove_edge(eid)
    elif r < 0.8 and members:
        g.delete_node(b.rng.choice(members))
    elif r < 0.9 and members:
        classes = [v for v in members if g.nodes[v].type == "Class"]
        if classes:
            v = b.rng.choice(classes)
            g.set_attr(v, "name", b.rng.choice(("List", "Array", "Map")))
    else:
        t = b.rng.choice(("Class", "Field", "Method", "Public", "Private", "Interface", NCR, CR, "ArrayDimension", "QualifiedTypeArgument"))
        attrs = {"name": f"z{g.next_id}"} if tg.attributes(t) else {}
        b.node(ci, t, **attrs)
