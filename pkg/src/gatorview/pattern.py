"""Patterns, seeded subgraph matching, and the Create/Update/Delete modes.

A pattern is the left-hand side of a marking rule: typed node variables,
typed edges between them, optional negated elements (a negative
application condition, NAC) and a :class:`MarkingSpec` telling which marker
to create for each match.

Matching is injective on nodes.  The search binds one seed variable and then
grows the binding along pattern edges, traversing graph edges in either
direction, so only nodes adjacent to already-bound nodes are ever tried.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import OwnershipError, PatternError, UnknownTypeError
from .graph import BASE, ROLE, SCOPE, VIEW, Graph, TypeGraph

EQ = "="
NE = "!="


@dataclass(frozen=True)
class AttrPredicate:
    attr: str
    op: str
    value: object

    def holds(self, attrs: Mapping) -> bool:
        present = self.attr in attrs
        if self.op == EQ:
            return present and attrs[self.attr] == self.value
        return not present or attrs[self.attr] != self.value


@dataclass(frozen=True)
class PatternNode:
    var: str
    type: str
    input: str | None = None  # connector name; None means a free variable
    predicates: tuple[AttrPredicate, ...] = ()

    @property
    def input_bound(self) -> bool:
        return self.input is not None


@dataclass(frozen=True)
class PatternEdge:
    source: str
    target: str
    type: str


@dataclass(frozen=True)
class RoleSpec:
    edge_type: str
    var: str
    # identity roles make up the duplicate key of a marker; the others can
    # be rebound by Update like scopes
    identity: bool = True


@dataclass(frozen=True)
class MarkingSpec:
    marker_type: str
    roles: tuple[RoleSpec, ...]
    scoped: tuple[str, ...] = ()

    @property
    def identity_roles(self) -> tuple[RoleSpec, ...]:
        return tuple(r for r in self.roles if r.identity)


@dataclass(frozen=True)
class Pattern:
    nodes: tuple[PatternNode, ...]
    edges: tuple[PatternEdge, ...] = ()
    negated_nodes: frozenset[str] = frozenset()
    negated_edges: frozenset[int] = frozenset()
    marking: MarkingSpec | None = None

    def node(self, var: str) -> PatternNode:
        for n in self.nodes:
            if n.var == var:
                return n
        raise KeyError(var)

    @property
    def positive_vars(self) -> tuple[str, ...]:
        return tuple(n.var for n in self.nodes if n.var not in self.negated_nodes)

    def is_negated_edge(self, index: int) -> bool:
        e = self.edges[index]
        return index in self.negated_edges or e.source in self.negated_nodes or e.target in self.negated_nodes


class Match:
    """An injective binding of pattern variables to node ids."""

    __slots__ = ("_items", "_map")

    def __init__(self, bindings: Mapping[str, int]):
        self._items = tuple(sorted(bindings.items()))
        self._map = dict(bindings)

    @property
    def bindings(self) -> dict[str, int]:
        return dict(self._map)

    def __getitem__(self, var: str) -> int:
        return self._map[var]

    def __contains__(self, var) -> bool:
        return var in self._map

    def __eq__(self, other):
        return isinstance(other, Match) and self._items == other._items

    def __hash__(self):
        return hash(self._items)

    def __lt__(self, other):
        return self._items < other._items

    def __repr__(self):
        return f"Match({self._map})"


# -- validation ---------------------------------------------------------


def validate_pattern(pattern: Pattern, tg: TypeGraph, *, require_marking: bool = True) -> None:
    """Raise PatternError unless ``pattern`` is well formed against ``tg``."""
    vars_ = [n.var for n in pattern.nodes]
    if len(set(vars_)) != len(vars_):
        raise PatternError("duplicate pattern variables")
    if not vars_:
        raise PatternError("empty pattern")
    var_type = {}
    for n in pattern.nodes:
        try:
            attrs = tg.attributes(n.type)
        except UnknownTypeError as exc:
            raise PatternError(str(exc)) from None
        var_type[n.var] = n.type
        for p in n.predicates:
            if p.op not in (EQ, NE):
                raise PatternError(f"{n.var}: unsupported comparator {p.op!r}")
            if p.attr not in attrs:
                raise PatternError(f"{n.var}: type {n.type} has no attribute {p.attr!r}")
    unknown = set(pattern.negated_nodes) - set(vars_)
    if unknown:
        raise PatternError(f"negated variables not in pattern: {sorted(unknown)}")
    for i in pattern.negated_edges:
        if not 0 <= i < len(pattern.edges):
            raise PatternError(f"negated edge index {i} out of range")
    for e in pattern.edges:
        if e.source not in var_type or e.target not in var_type:
            raise PatternError(f"edge {e} references unknown variables")
        try:
            et = tg.edge_type(e.type)
        except UnknownTypeError as exc:
            raise PatternError(str(exc)) from None
        if et.name == SCOPE:
            raise PatternError("patterns cannot traverse scopes")
        if not _compatible(tg, var_type[e.source], et.source_type) or not _compatible(tg, var_type[e.target], et.target_type):
            raise PatternError(f"edge {e.type!r} cannot connect {var_type[e.source]} to {var_type[e.target]}")

    positive = set(pattern.positive_vars)
    if not positive:
        raise PatternError("pattern has no positive variables")
    if not any(pattern.node(v).input_bound for v in positive):
        raise PatternError("pattern needs at least one input-bound positive variable")
    # positive part must be connected
    adj: dict[str, set[str]] = {v: set() for v in positive}
    for i, e in enumerate(pattern.edges):
        if not pattern.is_negated_edge(i):
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
    start = next(iter(sorted(positive)))
    seen, stack = {start}, [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if seen != positive:
        raise PatternError(f"positive part is not connected: {sorted(positive - seen)} unreachable")
    # negated nodes hang directly off positive ones
    for v in pattern.negated_nodes:
        n = pattern.node(v)
        if n.predicates:
            raise PatternError(f"negated variable {v!r} cannot carry attribute predicates")
        if n.input_bound and tg.layer(n.type) == BASE:
            raise PatternError(f"negated base variable {v!r} cannot be input-bound")
        touching = [e for e in pattern.edges if v in (e.source, e.target)]
        if not any((e.source in positive or e.target in positive) for e in touching):
            raise PatternError(f"negated variable {v!r} is not attached to a positive variable")
    for i, e in enumerate(pattern.edges):
        if pattern.is_negated_edge(i) and e.source not in positive and e.target not in positive:
            raise PatternError(f"negated edge {e} does not touch a positive variable")

    m = pattern.marking
    if m is None:
        if require_marking:
            raise PatternError("pattern has no marking")
        return
    try:
        mt = tg.node_type(m.marker_type)
    except UnknownTypeError as exc:
        raise PatternError(str(exc)) from None
    if mt.layer != VIEW:
        raise PatternError(f"marker type {m.marker_type!r} is not a view type")
    covered = [r.var for r in m.roles] + list(m.scoped)
    if sorted(covered) != sorted(positive):
        raise PatternError("roles and scopes must cover every positive variable exactly once")
    if not m.identity_roles:
        raise PatternError("marking needs at least one identity role")
    role_types = [r.edge_type for r in m.roles]
    if len(set(role_types)) != len(role_types):
        raise PatternError("role edge types must be distinct within a marking")
    for r in m.roles:
        try:
            et = tg.edge_type(r.edge_type)
        except UnknownTypeError as exc:
            raise PatternError(str(exc)) from None
        if et.layer != ROLE:
            raise PatternError(f"{r.edge_type!r} is not a role edge type")
        if not tg.conforms(m.marker_type, et.source_type):
            raise PatternError(f"role {r.edge_type!r} does not belong to {m.marker_type!r}")
        if not tg.conforms(var_type[r.var], et.target_type):
            raise PatternError(f"role {r.edge_type!r} cannot point at {var_type[r.var]}")


def _compatible(tg: TypeGraph, var_type: str, declared: str | None) -> bool:
    if declared is None:
        return True
    return tg.conforms(var_type, declared) or tg.conforms(declared, var_type)


# -- search -------------------------------------------------------------


@dataclass
class _Step:
    var: str
    anchor: str
    etype: str
    outgoing: bool  # True: anchor -> var
    checks: list[tuple[str, str, bool]] = field(default_factory=list)  # (other, etype, var is source)


@dataclass
class _NacGroup:
    nodes: list[str]
    edges: list[PatternEdge]


class _Compiled:
    def __init__(self, pattern: Pattern, tg: TypeGraph):
        self.pattern = pattern
        self.tg = tg
        self.node = {n.var: n for n in pattern.nodes}
        self.positive = list(pattern.positive_vars)
        self.pos_edges = [e for i, e in enumerate(pattern.edges) if not pattern.is_negated_edge(i)]
        self.input_vars = [v for v in self.positive if self.node[v].input_bound]
        self.nac_groups = self._nac_groups()
        self._plans: dict[tuple, list[_Step]] = {}

    def _nac_groups(self) -> list[_NacGroup]:
        p = self.pattern
        neg_nodes = [n.var for n in p.nodes if n.var in p.negated_nodes]
        parent = {v: v for v in neg_nodes}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        neg_edges = [e for i, e in enumerate(p.edges) if p.is_negated_edge(i)]
        for e in neg_edges:
            if e.source in parent and e.target in parent:
                parent[find(e.source)] = find(e.target)
        groups: dict[str, _NacGroup] = {}
        for v in neg_nodes:
            groups.setdefault(find(v), _NacGroup([], [])).nodes.append(v)
        out = list(groups.values())
        for e in neg_edges:
            owner = e.source if e.source in parent else e.target if e.target in parent else None
            if owner is None:
                out.append(_NacGroup([], [e]))
            else:
                groups[find(owner)].edges.append(e)
        return out

    def plan(self, bound: tuple[str, ...], targets: tuple[str, ...], edges: list[PatternEdge]) -> list[_Step]:
        """Order in which to bind ``targets`` given already-bound ``bound``."""
        key = (bound, targets)
        cached = self._plans.get(key)
        if cached is not None:
            return cached
        done = set(bound)
        remaining = list(targets)
        steps: list[_Step] = []
        while remaining:
            best = None
            for v in remaining:
                links = [e for e in edges if (e.source == v and e.target in done) or (e.target == v and e.source in done)]
                if links and (best is None or len(links) > best[1]):
                    best = (v, len(links), links)
            if best is None:
                raise PatternError(f"variables {remaining} are not reachable from {sorted(done)}")
            v, _, links = best
            first = links[0]
            if first.target == v:
                step = _Step(v, first.source, first.type, True)
            else:
                step = _Step(v, first.target, first.type, False)
            for e in links[1:]:
                if e.source == v:
                    step.checks.append((e.target, e.type, True))
                else:
                    step.checks.append((e.source, e.type, False))
            # self loops on v
            for e in edges:
                if e.source == v and e.target == v:
                    step.checks.append((v, e.type, True))
            steps.append(step)
            done.add(v)
            remaining.remove(v)
        self._plans[key] = steps
        return steps


_CACHE: dict[tuple[int, int], tuple[Pattern, TypeGraph, _Compiled]] = {}


def _compile(pattern: Pattern, tg: TypeGraph) -> _Compiled:
    # keyed by identity; the stored references keep the ids from being reused
    key = (id(pattern), id(tg))
    hit = _CACHE.get(key)
    if hit is None:
        hit = _CACHE[key] = (pattern, tg, _Compiled(pattern, tg))
    return hit[2]


def compiled(pattern: Pattern, tg: TypeGraph) -> _Compiled:
    return _compile(pattern, tg)


def _node_ok(graph: Graph, pn: PatternNode, nid: int, domain: set | None) -> bool:
    node = graph.nodes.get(nid)
    if node is None:
        return False
    if domain is not None and nid not in domain:
        return False
    if not graph.typegraph.conforms(node.type, pn.type):
        return False
    for p in pn.predicates:
        if not p.holds(node.attrs):
            return False
    return True


def _neighbors(graph: Graph, anchor: int, etype: str, outgoing: bool) -> Iterator[int]:
    if outgoing:
        for e in graph.out_edges(anchor):
            if e.type == etype:
                yield e.dst
    else:
        for e in graph.in_edges(anchor):
            if e.type == etype:
                yield e.src


def _edge_ok(graph: Graph, binding: dict, var: str, other: str, etype: str, var_is_source: bool) -> bool:
    a, b = binding[var], binding[other]
    return graph.has_edge(a, b, etype) if var_is_source else graph.has_edge(b, a, etype)


def _extend(graph, comp, steps, i, binding, used, domains, sink):
    if i == len(steps):
        sink(binding)
        return
    st = steps[i]
    pn = comp.node[st.var]
    domain = domains.get(st.var) if domains is not None else None
    seen = set()
    for nid in _neighbors(graph, binding[st.anchor], st.etype, st.outgoing):
        if nid in seen or nid in used:
            continue
        seen.add(nid)
        if not _node_ok(graph, pn, nid, domain):
            continue
        binding[st.var] = nid
        ok = True
        for other, etype, var_is_source in st.checks:
            if not _edge_ok(graph, binding, st.var, other, etype, var_is_source):
                ok = False
                break
        if ok:
            used.add(nid)
            _extend(graph, comp, steps, i + 1, binding, used, domains, sink)
            used.discard(nid)
        del binding[st.var]


def _nac_blocks(graph: Graph, comp: _Compiled, binding: dict) -> bool:
    """True if some negated element embeds consistently with ``binding``."""
    for group in comp.nac_groups:
        if not group.nodes:
            e = group.edges[0]
            if graph.has_edge(binding[e.source], binding[e.target], e.type):
                return True
            continue
        steps = comp.plan(tuple(sorted(binding)), tuple(group.nodes), group.edges)
        if _embeds(graph, comp, steps, 0, dict(binding), set(binding.values())):
            return True
    return False


def _embeds(graph, comp, steps, i, binding, used) -> bool:
    # existence search for a NAC group; stops at the first embedding
    if i == len(steps):
        return True
    st = steps[i]
    pn = comp.node[st.var]
    for nid in _neighbors(graph, binding[st.anchor], st.etype, st.outgoing):
        if nid in used or not _node_ok(graph, pn, nid, None):
            continue
        binding[st.var] = nid
        if all(_edge_ok(graph, binding, st.var, o, t, s) for o, t, s in st.checks):
            used.add(nid)
            if _embeds(graph, comp, steps, i + 1, binding, used):
                return True
            used.discard(nid)
        del binding[st.var]
    return False


def find_matches(
    graph: Graph,
    pattern: Pattern,
    candidates: Mapping[str, set[int]] | None = None,
    *,
    fixed: Mapping[str, int] | None = None,
    require_any: set[int] | None = None,
) -> list[Match]:
    """All matches of ``pattern`` in ``graph``.

    ``candidates`` maps connector names to node sets; an input-bound
    variable may only bind nodes from its connector's set.  ``None`` lifts
    the restriction.  ``fixed`` pre-binds variables.  With ``require_any``,
    only matches binding at least one input-bound variable to one of those
    nodes are reported.
    """
    tg = graph.typegraph
    comp = _compile(pattern, tg)
    domains: dict[str, set[int]] | None = None
    if candidates is not None:
        domains = {v: candidates.get(comp.node[v].input, set()) for v in comp.input_vars}
    results: set[Match] = set()
    fixed = dict(fixed or {})

    def sink(binding):
        if not _nac_blocks(graph, comp, binding):
            results.add(Match(binding))

    def run(seed: dict[str, int]) -> None:
        used = set()
        for v, nid in seed.items():
            if nid in used:
                return
            dom = domains.get(v) if domains is not None else None
            if not _node_ok(graph, comp.node[v], nid, dom):
                return
            used.add(nid)
        # edges among pre-bound variables
        for e in comp.pos_edges:
            if e.source in seed and e.target in seed and not graph.has_edge(seed[e.source], seed[e.target], e.type):
                return
        rest = tuple(v for v in comp.positive if v not in seed)
        steps = comp.plan(tuple(sorted(seed)), rest, comp.pos_edges)
        _extend(graph, comp, steps, 0, dict(seed), used, domains, sink)

    if require_any is not None:
        for v in comp.input_vars:
            if v in fixed:
                continue
            pool = require_any
            if domains is not None:
                pool = pool & domains[v]
            for nid in sorted(pool):
                run({**fixed, v: nid})
        if any(fixed.get(v) in require_any for v in comp.input_vars if v in fixed):
            run(fixed)
    elif fixed:
        run(fixed)
    else:
        seed_var, pool = _seed(graph, comp, domains)
        for nid in sorted(pool):
            run({seed_var: nid})
    return sorted(results)


def _seed(graph: Graph, comp: _Compiled, domains) -> tuple[str, Iterable[int]]:
    best = None
    for v in comp.input_vars:
        pool = domains[v] if domains is not None else graph.nodes_of_type(comp.node[v].type)
        if best is None or len(pool) < len(best[1]):
            best = (v, pool)
    return best


def verify_binding(graph: Graph, pattern: Pattern, binding: Mapping[str, int]) -> bool:
    """Whether ``binding`` is a match: types, predicates, injectivity, edges, NACs."""
    comp = _compile(pattern, graph.typegraph)
    if set(binding) != set(comp.positive):
        return False
    if len(set(binding.values())) != len(binding):
        return False
    for v, nid in binding.items():
        if not _node_ok(graph, comp.node[v], nid, None):
            return False
    for e in comp.pos_edges:
        if not graph.has_edge(binding[e.source], binding[e.target], e.type):
            return False
    return not _nac_blocks(graph, comp, dict(binding))


# -- execution modes -----------------------------------------------------


def marker_key(marking: MarkingSpec, match: Match) -> tuple[int, ...]:
    return tuple(match[r.var] for r in marking.identity_roles)


def find_marker(graph: Graph, marking: MarkingSpec, key: tuple[int, ...]) -> int | None:
    """The existing marker of exactly ``marking.marker_type`` with this key."""
    roles = marking.identity_roles
    first = roles[0]
    for e in graph.in_edges(key[0]):
        if e.type != first.edge_type:
            continue
        m = graph.nodes.get(e.src)
        if m is None or m.type != marking.marker_type:
            continue
        if all(graph.has_edge(m.id, t, r.edge_type) for r, t in zip(roles[1:], key[1:])):
            return m.id
    return None


def _mark(graph: Graph, marker: int, marking: MarkingSpec, match: Match) -> None:
    for r in marking.roles:
        graph.link(marker, r.edge_type, match[r.var])
    for v in marking.scoped:
        graph.link(marker, SCOPE, match[v])


def execute_create(module, graph: Graph, candidates: Mapping[str, set[int]] | None, *, require_any=None) -> list[int]:
    """Create mode: mark every not-yet-marked match; return new marker ids."""
    marking = module.pattern.marking
    created = []
    for match in find_matches(graph, module.pattern, candidates, require_any=require_any):
        key = marker_key(marking, match)
        if find_marker(graph, marking, key) is not None:
            continue
        node = graph.new_marker(marking.marker_type, module.name)
        _mark(graph, node.id, marking, match)
        created.append(node.id)
    return created


VALID = "valid"
REWIRED = "rewired"
OBSOLETE = "obsolete"


def _owned(module, graph: Graph, nid: int):
    node = graph.node(nid)
    if node.module != module.name:
        raise OwnershipError(f"view node {nid} belongs to {node.module!r}, not {module.name!r}")
    return node


def update_marker(module, graph: Graph, nid: int) -> str:
    """Re-check one marker; returns ``valid``, ``rewired`` or ``obsolete``.

    Identity roles pin the match.  Scopes and non-identity roles may be
    rebound to another extension of the pinned variables.
    """
    node = _owned(module, graph, nid)
    if node.obsolete:
        return OBSOLETE
    marking = module.pattern.marking
    edges = list(graph.out_edges(nid))
    by_type: dict[str, int] = {}
    scopes = set()
    dangling = False
    for e in edges:
        if e.dst not in graph.nodes:
            dangling = True
        elif e.type == SCOPE:
            scopes.add(e.dst)
        else:
            by_type[e.type] = e.dst
    fixed = {}
    if not dangling:
        for r in marking.identity_roles:
            if r.edge_type not in by_type:
                dangling = True
                break
            fixed[r.var] = by_type[r.edge_type]
    matches = [] if dangling else find_matches(graph, module.pattern, None, fixed=fixed)
    if not matches:
        set_obsolete(graph, nid)
        return OBSOLETE
    loose = [r for r in marking.roles if not r.identity]
    for m in matches:
        if all(by_type.get(r.edge_type) == m[r.var] for r in loose) and scopes == {m[v] for v in marking.scoped}:
            return VALID
    best = matches[0]
    for e in edges:
        if e.type == SCOPE or any(e.type == r.edge_type for r in loose):
            graph.unlink(e.id)
    for r in loose:
        graph.link(nid, r.edge_type, best[r.var])
    for v in marking.scoped:
        graph.link(nid, SCOPE, best[v])
    return REWIRED


def set_obsolete(graph: Graph, nid: int) -> None:
    node = graph.node(nid)
    node.former = tuple(sorted(node.former + tuple((e.type, e.dst) for e in graph.out_edges(nid))))
    for e in list(graph.out_edges(nid)):
        graph.unlink(e.id)
    node.obsolete = True


def execute_update(module, graph: Graph, suspicious: Iterable[int]) -> set[int]:
    """Update mode over several markers; returns those set obsolete."""
    out = set()
    for nid in sorted(suspicious):
        if update_marker(module, graph, nid) == OBSOLETE:
            out.add(nid)
    return out


def execute_delete(module, graph: Graph, obsoletes: Iterable[int]) -> set[int]:
    """Delete mode; returns every node the deleted markers used to mark."""
    previously = set()
    for nid in sorted(obsoletes):
        node = _owned(module, graph, nid)
        out = list(graph.out_edges(nid))
        if not node.obsolete and not any(e.dst not in graph.nodes for e in out):
            raise OwnershipError(f"view node {nid} is neither obsolete nor dangling")
        previously.update(t for _, t in node.former)
        previously.update(e.dst for e in out)
        graph.drop_marker(nid)
    return previously
