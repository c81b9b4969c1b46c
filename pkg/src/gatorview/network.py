"""View modules, discrimination networks, execution plans and lowering.

A network is a directed graph of view modules.  A wire feeds the markers a
producer creates into one input connector of a consumer; several producers
wired into the same connector form a disjunction.  Cycles are allowed only
when declared, and each one is executed as a single plan step that reruns
until its fix-point module stops creating markers.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

import networkx as nx

from .errors import NetworkError, PatternError, UnknownTypeError
from .graph import BASE, ROLE, VIEW, EdgeTypeDef, NodeTypeDef, TypeGraph
from .pattern import MarkingSpec, Pattern, PatternEdge, PatternNode, RoleSpec, validate_pattern

INPUT = "input"
OUTPUT = "output"


@dataclass(frozen=True)
class Connector:
    name: str
    type: str
    # negative connectors feed negated view nodes: they order the plan and
    # define dependents, but never supply candidates
    negative: bool = False
    direction: str = INPUT


@dataclass(frozen=True)
class ViewModule:
    name: str
    pattern: Pattern
    inputs: tuple[Connector, ...]

    @property
    def marker_type(self) -> str:
        return self.pattern.marking.marker_type

    @property
    def output(self) -> Connector:
        return Connector(self.name, self.marker_type, direction=OUTPUT)

    def connector(self, name: str) -> Connector:
        for c in self.inputs:
            if c.name == name:
                return c
        raise NetworkError(f"module {self.name!r} has no input {name!r}")

    @property
    def positive_inputs(self) -> tuple[Connector, ...]:
        return tuple(c for c in self.inputs if not c.negative)


@dataclass(frozen=True)
class Wire:
    producer: str
    consumer: str
    input: str


@dataclass(frozen=True)
class Cycle:
    modules: frozenset[str]
    fixpoint: str | None = None


class Network:
    """A validated set of modules, wires and declared recursion cycles."""

    def __init__(self, typegraph: TypeGraph, modules: Iterable[ViewModule], wires: Iterable[Wire], cycles: Iterable[Cycle]):
        self.typegraph = typegraph
        self.modules: dict[str, ViewModule] = {}
        for m in modules:
            if m.name in self.modules:
                raise NetworkError(f"duplicate module {m.name!r}")
            self.modules[m.name] = m
        self.wires: tuple[Wire, ...] = tuple(sorted(set(wires), key=lambda w: (w.producer, w.consumer, w.input)))
        self.cycles: tuple[Cycle, ...] = tuple(cycles)
        self._by_marker = {m.marker_type: m.name for m in self.modules.values()}
        self._dependents: dict[str, tuple[str, ...]] = {}
        for name in self.modules:
            self._dependents[name] = tuple(sorted({w.consumer for w in self.wires if w.producer == name}))

    def module(self, name: str) -> ViewModule:
        try:
            return self.modules[name]
        except KeyError:
            raise NetworkError(f"unknown module {name!r}") from None

    def dependents(self, name: str) -> tuple[str, ...]:
        return self._dependents[name]

    def producers(self, consumer: str, input_name: str | None = None) -> tuple[str, ...]:
        return tuple(
            sorted({w.producer for w in self.wires if w.consumer == consumer and (input_name is None or w.input == input_name)})
        )

    def module_for_marker(self, marker_type: str) -> str | None:
        return self._by_marker.get(marker_type)

    @property
    def marker_types(self) -> frozenset[str]:
        return frozenset(self._by_marker)

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.modules)
        g.add_edges_from((w.producer, w.consumer) for w in self.wires)
        return g

    def cycle_of(self, name: str) -> Cycle | None:
        for c in self.cycles:
            if name in c.modules:
                return c
        return None


def infer_inputs(pattern: Pattern, tg: TypeGraph) -> tuple[Connector, ...]:
    """Derive input connectors from the ``input`` names of pattern nodes.

    A connector's type is the most specific common supertype of the
    variables bound to it.
    """
    groups: dict[str, list[PatternNode]] = {}
    for n in pattern.nodes:
        if n.input is not None:
            groups.setdefault(n.input, []).append(n)
    out = []
    for name, nodes in groups.items():
        negs = {n.var in pattern.negated_nodes for n in nodes}
        if len(negs) > 1:
            raise NetworkError(f"connector {name!r} mixes positive and negated variables")
        t = tg.common_supertype(n.type for n in nodes)
        if t is None:
            raise NetworkError(f"connector {name!r}: variables share no common type")
        out.append(Connector(name, t, negative=negs.pop()))
    return tuple(out)


def module(name: str, pattern: Pattern, tg: TypeGraph, inputs: Sequence[Connector] | None = None) -> ViewModule:
    """Convenience constructor inferring connectors when none are given."""
    return ViewModule(name, pattern, tuple(inputs) if inputs is not None else infer_inputs(pattern, tg))


def _validate_module(m: ViewModule, tg: TypeGraph) -> None:
    try:
        validate_pattern(m.pattern, tg)
    except PatternError as exc:
        raise NetworkError(f"module {m.name!r}: {exc}") from None
    names = [c.name for c in m.inputs]
    if len(set(names)) != len(names):
        raise NetworkError(f"module {m.name!r}: duplicate connector names")
    used = set()
    for n in m.pattern.nodes:
        if n.input is None:
            continue
        c = next((c for c in m.inputs if c.name == n.input), None)
        if c is None:
            raise NetworkError(f"module {m.name!r}: variable {n.var!r} names unknown connector {n.input!r}")
        try:
            ok = tg.conforms(n.type, c.type)
        except UnknownTypeError as exc:
            raise NetworkError(f"module {m.name!r}: {exc}") from None
        if not ok:
            raise NetworkError(f"module {m.name!r}: variable {n.var!r} ({n.type}) does not conform to connector {c.name!r} ({c.type})")
        if c.negative != (n.var in m.pattern.negated_nodes):
            raise NetworkError(f"module {m.name!r}: connector {c.name!r} polarity does not match variable {n.var!r}")
        used.add(c.name)
    unused = set(names) - used
    if unused:
        raise NetworkError(f"module {m.name!r}: connectors {sorted(unused)} bind no variable")


def build_network(
    typegraph: TypeGraph,
    modules: Iterable[ViewModule],
    wires: Iterable[Wire] = (),
    cycles: Iterable[Cycle | Iterable[str]] = (),
) -> Network:
    """Assemble and validate a network."""
    cyc = []
    for c in cycles:
        if not isinstance(c, Cycle):
            c = Cycle(frozenset(c))
        cyc.append(c)
    net = Network(typegraph, modules, wires, cyc)
    tg = typegraph
    markers: dict[str, str] = {}
    for m in net.modules.values():
        _validate_module(m, tg)
        if m.marker_type in markers:
            raise NetworkError(f"modules {markers[m.marker_type]!r} and {m.name!r} produce the same marker type")
        markers[m.marker_type] = m.name
    for w in net.wires:
        prod = net.module(w.producer)
        cons = net.module(w.consumer)
        conn = cons.connector(w.input)
        if not tg.conforms(prod.marker_type, conn.type):
            raise NetworkError(
                f"wire {w.producer}->{w.consumer}.{w.input}: {prod.marker_type} does not conform to {conn.type}"
            )
    for m in net.modules.values():
        for c in m.inputs:
            if tg.layer(c.type) == VIEW and not net.producers(m.name, c.name):
                raise NetworkError(f"module {m.name!r}: view input {c.name!r} has no producer")
    g = net.digraph()
    declared = {c.modules for c in net.cycles}
    for c in net.cycles:
        missing = set(c.modules) - set(net.modules)
        if missing:
            raise NetworkError(f"declared cycle names unknown modules {sorted(missing)}")
        if c.fixpoint is not None and c.fixpoint not in c.modules:
            raise NetworkError(f"fix-point {c.fixpoint!r} is not part of its cycle")
    actual = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(v, v) for v in comp):
            actual.add(frozenset(comp))
    for comp in actual - declared:
        raise NetworkError(f"undeclared recursion cycle {sorted(comp)}")
    for comp in declared - actual:
        raise NetworkError(f"declared cycle {sorted(comp)} is not a cycle of the wiring")
    return net


# -- planning -----------------------------------------------------------


@dataclass(frozen=True)
class PlanStep:
    modules: tuple[str, ...]
    fixpoint: str | None = None

    @property
    def is_cycle(self) -> bool:
        return self.fixpoint is not None


@dataclass(frozen=True)
class ExecutionPlan:
    steps: tuple[PlanStep, ...]

    @property
    def order(self) -> tuple[str, ...]:
        return tuple(m for s in self.steps for m in s.modules)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.steps):
            if name in s.modules:
                return i
        raise KeyError(name)

    def dump(self) -> str:
        lines = []
        for i, s in enumerate(self.steps, 1):
            if s.is_cycle:
                lines.append(f"{i}. cycle {' -> '.join(s.modules)} (fix point: {s.fixpoint})")
            else:
                lines.append(f"{i}. {s.modules[0]}")
        return "\n".join(lines)


def _fixpoint_order(g: nx.DiGraph, members: frozenset[str], fp: str) -> tuple[str, ...] | None:
    sub = g.subgraph(members).copy()
    sub.remove_edges_from([(fp, v) for v in list(sub.successors(fp))])
    if not nx.is_directed_acyclic_graph(sub):
        return None
    return tuple(nx.lexicographical_topological_sort(sub))


def plan_execution(network: Network) -> ExecutionPlan:
    """Topological schedule over the condensed wiring graph."""
    g = network.digraph()
    cond = nx.condensation(g)
    members = cond.graph["mapping"]
    comps = {i: frozenset(v for v, c in members.items() if c == i) for i in cond.nodes}
    steps = []
    for ci in nx.lexicographical_topological_sort(cond, key=lambda c: min(comps[c])):
        mods = comps[ci]
        if len(mods) == 1 and not g.has_edge(next(iter(mods)), next(iter(mods))):
            steps.append(PlanStep((next(iter(mods)),)))
            continue
        cycle = network.cycle_of(next(iter(mods)))
        outside = {m: any(d not in mods for d in network.dependents(m)) for m in mods}
        # a cycle nobody consumes is connected to the termination of the network
        eligible = [m for m in sorted(mods) if outside[m]] or sorted(mods)
        if cycle is not None and cycle.fixpoint is not None:
            if cycle.fixpoint not in eligible:
                raise NetworkError(f"module {cycle.fixpoint!r} is not an eligible fix point")
            eligible = [cycle.fixpoint]
        chosen = None
        for fp in eligible:
            order = _fixpoint_order(g, mods, fp)
            if order is not None:
                chosen = (order, fp)
                break
        if chosen is None:
            raise NetworkError(f"cycle {sorted(mods)} has no eligible fix-point module")
        steps.append(PlanStep(chosen[0], chosen[1]))
    return ExecutionPlan(tuple(steps))


# -- condition lowering ---------------------------------------------------


@dataclass(frozen=True)
class Atomic:
    name: str
    pattern: Pattern


@dataclass(frozen=True)
class And:
    """Conjunction.  ``pattern`` is the consumer's join pattern; its positive
    view-typed connectors, in declaration order, receive the positive
    children in order.  ``Not`` children attach via shared variable names."""

    name: str
    pattern: Pattern
    children: tuple = ()


@dataclass(frozen=True)
class Or:
    children: tuple
    supertype: str


@dataclass(frozen=True)
class Not:
    child: object


Condition = Union[Atomic, And, Or, Not]


@dataclass
class NetworkFragment:
    modules: list[ViewModule] = field(default_factory=list)
    wires: list[Wire] = field(default_factory=list)
    output: str | None = None
    producers: tuple[str, ...] = ()

    def merge(self, other: NetworkFragment) -> None:
        for m in other.modules:
            if all(m.name != k.name for k in self.modules):
                self.modules.append(m)
        for w in other.wires:
            if w not in self.wires:
                self.wires.append(w)


def _is_simple(child: Pattern, shared: set[str]) -> bool:
    others = [n for n in child.nodes if n.var not in shared]
    if any(n.predicates for n in others):
        return False
    for e in child.edges:
        if e.source not in shared and e.target not in shared:
            return False
    return True


def lower_condition(ast: Condition, typegraph: TypeGraph) -> NetworkFragment:
    """Map a condition tree onto modules and wires."""
    if isinstance(ast, Not):
        raise NetworkError("a negation must appear inside a conjunction")
    if isinstance(ast, Atomic):
        for n in ast.pattern.nodes:
            if typegraph.layer(n.type) != BASE:
                raise NetworkError(f"atomic condition {ast.name!r} may only use base-layer nodes")
        m = module(ast.name, ast.pattern, typegraph)
        return NetworkFragment([m], [], m.marker_type, (m.name,))
    if isinstance(ast, Or):
        frag = NetworkFragment(output=ast.supertype)
        prods: list[str] = []
        for child in ast.children:
            sub = lower_condition(child, typegraph)
            if sub.output is None or not typegraph.conforms(sub.output, ast.supertype):
                raise NetworkError(f"disjunct output {sub.output!r} does not conform to {ast.supertype!r}")
            frag.merge(sub)
            prods.extend(sub.producers)
        if typegraph.layer(ast.supertype) != VIEW:
            raise NetworkError(f"disjunction type {ast.supertype!r} is not a view type")
        frag.producers = tuple(prods)
        return frag
    if not isinstance(ast, And):
        raise NetworkError(f"unknown condition node {ast!r}")

    frag = NetworkFragment()
    pattern = ast.pattern
    positives = [c for c in ast.children if not isinstance(c, Not)]
    negations = [c.child for c in ast.children if isinstance(c, Not)]
    nodes = list(pattern.nodes)
    edges = list(pattern.edges)
    neg_nodes = set(pattern.negated_nodes)
    neg_edges = set(pattern.negated_edges)
    positive_vars = set(pattern.positive_vars)
    neg_wires: list[tuple[str, str]] = []

    for child in negations:
        if isinstance(child, Atomic):
            cpat = child.pattern
            shared = {n.var for n in cpat.nodes} & positive_vars
            if not shared:
                raise NetworkError(f"negated condition {child.name!r} shares no variable with {ast.name!r}")
            for n in cpat.nodes:
                if n.var in shared and n.predicates:
                    raise NetworkError(f"negated condition {child.name!r} constrains shared variable {n.var!r}")
            if _is_simple(cpat, shared):
                # simple NAC: embed the negated elements in the consumer
                for n in cpat.nodes:
                    if n.var in shared:
                        continue
                    if any(k.var == n.var for k in nodes):
                        raise NetworkError(f"variable {n.var!r} clashes while embedding {child.name!r}")
                    nodes.append(replace(n, input=None))
                    neg_nodes.add(n.var)
                for e in cpat.edges:
                    edges.append(e)
                    neg_edges.add(len(edges) - 1)
                continue
        # complex NAC: a producer for the child plus a negated marker node
        sub = lower_condition(child, typegraph)
        frag.merge(sub)
        marking = None
        if isinstance(child, (Atomic, And)):
            marking = child.pattern.marking
        if marking is None:
            raise NetworkError("complex negation needs a marking on its child")
        cname = getattr(child, "name", "cond")
        var = f"__not_{cname}"
        conn = f"not_{cname}"
        nodes.append(PatternNode(var, marking.marker_type, conn))
        neg_nodes.add(var)
        attached = False
        for r in marking.identity_roles:
            if r.var in positive_vars:
                edges.append(PatternEdge(var, r.var, r.edge_type))
                neg_edges.add(len(edges) - 1)
                attached = True
        if not attached:
            raise NetworkError(f"negated condition {cname!r} has no identity role on a shared variable")
        for p in sub.producers:
            neg_wires.append((p, conn))

    new_pattern = Pattern(tuple(nodes), tuple(edges), frozenset(neg_nodes), frozenset(neg_edges), pattern.marking)
    consumer = module(ast.name, new_pattern, typegraph)
    view_inputs = [c for c in consumer.positive_inputs if typegraph.layer(c.type) == VIEW]
    if len(view_inputs) != len(positives):
        raise NetworkError(
            f"conjunction {ast.name!r} has {len(view_inputs)} view inputs but {len(positives)} positive children"
        )
    for conn, child in zip(view_inputs, positives):
        sub = lower_condition(child, typegraph)
        if sub.output is None or not typegraph.conforms(sub.output, conn.type):
            raise NetworkError(f"child output {sub.output!r} does not fit input {conn.name!r} ({conn.type})")
        frag.merge(sub)
        for p in sub.producers:
            frag.wires.append(Wire(p, ast.name, conn.name))
    for p, conn in neg_wires:
        frag.wires.append(Wire(p, ast.name, conn))
    frag.modules.append(consumer)
    frag.output = consumer.marker_type
    frag.producers = (consumer.name,)
    return frag


# -- Rete emulation -------------------------------------------------------


def _input_order(pattern: Pattern, inputs: list[str]) -> list[str]:
    """Breadth-first order of input variables over edges among them."""
    inset = set(inputs)
    adj: dict[str, list[str]] = {v: [] for v in inputs}
    for i, e in enumerate(pattern.edges):
        if pattern.is_negated_edge(i):
            continue
        if e.source in inset and e.target in inset and e.source != e.target:
            adj[e.source].append(e.target)
            adj[e.target].append(e.source)
    order = [inputs[0]]
    seen = {inputs[0]}
    i = 0
    while i < len(order):
        for w in adj[order[i]]:
            if w not in seen:
                seen.add(w)
                order.append(w)
        i += 1
    if len(order) != len(inputs):
        raise NetworkError("input variables are not connected among themselves; cannot decompose")
    return order


def emulate_rete(network: Network) -> Network:
    """Rewrite every module with more than two input variables into a
    left-deep chain of binary join modules.

    Join ``k`` materialises partial matches over the first ``k + 1`` input
    variables as markers of the fresh type ``<module>__join<k>``; the last
    module keeps the original name, pattern semantics and marking.
    """
    if network.cycles:
        raise NetworkError("Rete emulation needs an acyclic network")
    tg = network.typegraph
    new_nodes: list[NodeTypeDef] = []
    new_edges: list[EdgeTypeDef] = []
    modules: list[ViewModule] = []
    wires: list[Wire] = []
    remap: dict[tuple[str, str], list[tuple[str, str]]] = {}

    for m in network.modules.values():
        pat = m.pattern
        inputs = [n.var for n in pat.nodes if n.input is not None and n.var not in pat.negated_nodes]
        if len(inputs) <= 2:
            modules.append(m)
            continue
        order = _input_order(pat, inputs)
        pnode = {n.var: n for n in pat.nodes}
        conns = {c.name: c for c in m.inputs}
        n = len(order)
        stage_inputs: dict[str, set[str]] = {}
        prev_type = None
        prev_roles: dict[str, str] = {}
        for k in range(1, n - 1):
            jname = f"{m.name}__join{k}"
            new_nodes.append(NodeTypeDef(jname, None, VIEW))
            covered = order[: k + 1]
            roles = {}
            for v in covered:
                ename = f"{jname}__{v}"
                new_edges.append(EdgeTypeDef(ename, jname, pnode[v].type, ROLE))
                roles[v] = ename
            if k == 1:
                nodes = [pnode[order[0]], pnode[order[1]]]
                edges = [
                    e
                    for i, e in enumerate(pat.edges)
                    if not pat.is_negated_edge(i) and e.source in covered and e.target in covered
                ]
                used = [pnode[order[0]].input, pnode[order[1]].input]
                scoped: tuple[str, ...] = ()
            else:
                last = order[k]
                nodes = [PatternNode("__prev", prev_type, "prev")]
                nodes += [replace(pnode[v], input=None) for v in order[:k]]
                nodes.append(pnode[last])
                edges = [PatternEdge("__prev", v, prev_roles[v]) for v in order[:k]]
                edges += [
                    e
                    for i, e in enumerate(pat.edges)
                    if not pat.is_negated_edge(i) and last in (e.source, e.target) and e.source in covered and e.target in covered
                ]
                used = ["prev", pnode[last].input]
                scoped = ("__prev",)
            marking = MarkingSpec(jname, tuple(RoleSpec(roles[v], v) for v in covered), scoped)
            jp = Pattern(tuple(nodes), tuple(edges), marking=marking)
            jin = []
            for cname in dict.fromkeys(used):
                jin.append(Connector("prev", prev_type) if cname == "prev" else conns[cname])
            modules.append(ViewModule(jname, jp, tuple(jin)))
            stage_inputs[jname] = {c for c in used if c != "prev"}
            if k > 1:
                wires.append(Wire(f"{m.name}__join{k - 1}", jname, "prev"))
            prev_type = jname
            prev_roles = roles
        # final stage keeps the module's name and marking
        last = order[-1]
        prefix = set(order[:-1])
        nodes = [PatternNode("__prev", prev_type, "prev")]
        for node in pat.nodes:
            if node.var in prefix:
                nodes.append(replace(node, input=None))
            else:
                nodes.append(node)
        edges = [PatternEdge("__prev", v, prev_roles[v]) for v in order[:-1]]
        neg_idx = []
        for i, e in enumerate(pat.edges):
            if not pat.is_negated_edge(i) and e.source in prefix and e.target in prefix:
                continue
            if i in pat.negated_edges:
                neg_idx.append(len(edges))
            edges.append(e)
        marking = replace(pat.marking, scoped=pat.marking.scoped + ("__prev",))
        fp = Pattern(tuple(nodes), tuple(edges), pat.negated_nodes, frozenset(neg_idx), marking)
        fin_inputs = [Connector("prev", prev_type)]
        final_used = {pnode[last].input} | {node.input for node in pat.nodes if node.input and node.var in pat.negated_nodes}
        for c in m.inputs:
            if c.name in final_used:
                fin_inputs.append(c)
        modules.append(ViewModule(m.name, fp, tuple(fin_inputs)))
        stage_inputs[m.name] = final_used
        wires.append(Wire(prev_type, m.name, "prev"))
        for c in m.inputs:
            remap[(m.name, c.name)] = [(stage, c.name) for stage, used in stage_inputs.items() if c.name in used]

    for w in network.wires:
        for consumer, conn in remap.get((w.consumer, w.input), [(w.consumer, w.input)]):
            wires.append(Wire(w.producer, consumer, conn))
    rtg = tg.extended(new_nodes, new_edges)
    return build_network(rtg, modules, wires)


def top_level_types(network: Network) -> frozenset[str]:
    """Marker types not introduced by Rete emulation."""
    return frozenset(t for t in network.marker_types if "__join" not in t)
