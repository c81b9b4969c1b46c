"""Incremental maintenance of view graphs.

One call of :meth:`Maintainer.maintain` runs the phase loop::

    repeat
        suspicious |= suspicious_nodes(events)
        obsoletes   = update(suspicious) | obsolete_nodes(events)
        changed     = delete(obsoletes) | changed_nodes(events)
        suspicious  = create(changed)
        events      = {}
    until suspicious is empty

Events feed only the first iteration.  Later iterations are driven by
markers that creation made suspicious, which is how dissatisfied complex
negative conditions are resolved within the same call.
"""
from __future__ import annotations

import time
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

from .errors import LoopLimitError, NetworkError
from .graph import (
    ATTRIBUTE_CHANGED,
    BASE,
    EDGE_ADDED,
    EDGE_REMOVED,
    NODE_CREATED,
    NODE_DELETED,
    SCOPE,
    ChangeEvent,
    Graph,
    backward_marks,
)
from .network import ExecutionPlan, Network, PlanStep, ViewModule, plan_execution
from .pattern import OBSOLETE, REWIRED, execute_create, execute_delete, update_marker

PHASES = ("update", "delete", "create")


@dataclass
class MaintenanceReport:
    iterations: int = 0
    updated: int = 0
    rewired: int = 0
    obsoleted: int = 0
    deleted: int = 0
    created: int = 0
    candidates: int = 0
    cycle_iterations: int = 0
    events: int = 0
    times: dict[str, float] = field(default_factory=lambda: {p: 0.0 for p in PHASES})
    trace: list[str] = field(default_factory=list)

    def to_dict(self, *, with_trace: bool = False) -> dict:
        d = asdict(self)
        if not with_trace:
            d.pop("trace")
        return d

    def merge(self, other: MaintenanceReport) -> None:
        for name in ("iterations", "updated", "rewired", "obsoleted", "deleted", "created", "candidates", "events"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.cycle_iterations = max(self.cycle_iterations, other.cycle_iterations)
        for k, v in other.times.items():
            self.times[k] = self.times.get(k, 0.0) + v
        self.trace.extend(other.trace)


# -- event classification -----------------------------------------------


def modified_nodes(events: Iterable[ChangeEvent]) -> set[int]:
    """Attribute-changed nodes and both endpoints of base edge changes."""
    out: set[int] = set()
    for ev in events:
        if ev.kind == ATTRIBUTE_CHANGED:
            out.add(ev.node)
        elif ev.kind == EDGE_ADDED or (ev.kind == EDGE_REMOVED and (ev.snapshot or {}).get("layer", BASE) == BASE):
            out.add(ev.src)
            out.add(ev.dst)
    return out


def suspicious_nodes(graph: Graph, events: Iterable[ChangeEvent]) -> set[int]:
    """Markers of modified base nodes."""
    out: set[int] = set()
    for nid in modified_nodes(events):
        out |= backward_marks(graph, nid)
    return {n for n in out if n in graph.nodes}


def obsolete_nodes(graph: Graph, events: Iterable[ChangeEvent]) -> set[int]:
    """Markers left with a dangling role edge or scope by a deletion."""
    out: set[int] = set()
    for ev in events:
        if ev.kind == NODE_DELETED and ev.snapshot:
            out.update(ev.snapshot.get("marked_by", ()))
    return {n for n in out if n in graph.nodes}


def changed_nodes(graph: Graph, events: Iterable[ChangeEvent]) -> set[int]:
    """Created and modified base nodes, plus what a deleted view node marked."""
    events = list(events)
    out = modified_nodes(events)
    for ev in events:
        if ev.kind == NODE_CREATED:
            out.add(ev.node)
        elif ev.kind == NODE_DELETED and ev.snapshot and ev.snapshot.get("view"):
            out.update(ev.snapshot.get("marks", ()))
    return {n for n in out if n in graph.nodes}


class Region:
    """Union of the connected components around a set of seed nodes.

    Nodes are bucketed by exact type so candidate sets for a connector are
    unions over the connector type's subtypes.
    """

    def __init__(self, graph: Graph, seeds: Iterable[int] = ()):
        self.graph = graph
        self.nodes: set[int] = set()
        self._by_type: dict[str, set[int]] = {}
        self.extend(seeds)

    def _add(self, nid: int) -> None:
        self.nodes.add(nid)
        self._by_type.setdefault(self.graph.nodes[nid].type, set()).add(nid)

    def extend(self, seeds: Iterable[int]) -> None:
        g = self.graph
        queue = deque()
        for s in seeds:
            if s in g.nodes and s not in self.nodes:
                self._add(s)
                queue.append(s)
        while queue:
            n = queue.popleft()
            for e in g.out_edges(n):
                if e.dst in g.nodes and e.dst not in self.nodes:
                    self._add(e.dst)
                    queue.append(e.dst)
            for e in g.in_edges(n):
                if e.src not in self.nodes:
                    self._add(e.src)
                    queue.append(e.src)

    def conforming(self, type_name: str) -> set[int]:
        out: set[int] = set()
        for t in self.graph.typegraph.subtypes(type_name):
            ids = self._by_type.get(t)
            if ids:
                out |= {n for n in ids if n in self.graph.nodes}
        return out

    def candidates(self, module: ViewModule, network: Network | None = None) -> dict[str, set[int]]:
        return {c.name: wired(self.graph, network, module, c, self.conforming(c.type)) for c in module.positive_inputs}


def wired(graph: Graph, network: Network | None, module: ViewModule, connector, ids: set[int]) -> set[int]:
    """Keep only markers made by producers wired into ``connector``.

    Base nodes pass unchanged.  Without a network nothing is filtered.
    """
    if network is None or graph.typegraph.layer(connector.type) == BASE:
        return ids
    producers = set(network.producers(module.name, connector.name))
    return {n for n in ids if graph.nodes[n].module in producers}


def reachability_missing(
    graph: Graph, changed: Iterable[int], module: ViewModule, network: Network | None = None
) -> dict[str, set[int]]:
    """Per-connector candidates: type-conforming nodes in the components of ``changed``."""
    return Region(graph, changed).candidates(module, network)


def has_complex_nac(module: ViewModule, graph: Graph) -> bool:
    tg = graph.typegraph
    p = module.pattern
    return any(tg.layer(p.node(v).type) != BASE for v in p.negated_nodes)


def reachability_suspicious(graph: Graph, created: Iterable[int], dependents: Iterable[ViewModule]) -> set[int]:
    """Markers of dependents with a complex NAC reachable from ``created``.

    The walk passes only through nodes conforming to a positive pattern type
    of the dependent, and collects nodes of the dependent's marker type.
    """
    created = [c for c in created if c in graph.nodes]
    tg = graph.typegraph
    out: set[int] = set()
    if not created:
        return out
    for dep in dependents:
        if not has_complex_nac(dep, graph):
            continue
        p = dep.pattern
        allowed = {p.node(v).type for v in p.positive_vars}
        target = dep.marker_type
        seen = set(created)
        queue = deque(created)
        while queue:
            n = queue.popleft()
            nbrs = [e.dst for e in graph.out_edges(n)] + [e.src for e in graph.in_edges(n)]
            for m in nbrs:
                if m in seen or m not in graph.nodes:
                    continue
                seen.add(m)
                t = graph.nodes[m].type
                if tg.conforms(t, target):
                    out.add(m)
                elif any(tg.conforms(t, a) for a in allowed):
                    queue.append(m)
    return out


# -- canonical view comparison -------------------------------------------


def view_signature(
    graph: Graph, network: Network, types: Iterable[str] | None = None, rename: Mapping[int, int] | None = None
) -> Counter:
    """Multiset of canonical marker keys.

    A key is the marker type plus the identity-role targets in declared
    order; targets that are markers are replaced by their own key, so two
    view layers compare equal independent of marker ids.  ``rename`` maps
    base node ids to the names they should be compared under.
    """
    rename = rename or {}
    memo: dict[int, tuple] = {}
    by_type = {m.marker_type: m for m in network.modules.values()}

    def key(nid: int) -> tuple:
        hit = memo.get(nid)
        if hit is not None:
            return hit
        node = graph.nodes.get(nid)
        if node is None:
            return ("<missing>", nid)
        if not node.view:
            return ("node", rename.get(nid, nid))
        mod = network.modules.get(node.module) or by_type.get(node.type)
        targets = {e.type: e.dst for e in graph.out_edges(nid) if e.type != SCOPE}
        if mod is None:
            roles = tuple(sorted((t, key(d)) for t, d in targets.items()))
        else:
            roles = tuple(key(targets[r.edge_type]) if r.edge_type in targets else ("<unbound>",) for r in mod.pattern.marking.identity_roles)
        k = (node.type, roles)
        memo[nid] = k
        return k

    wanted = set(types) if types is not None else None
    out = Counter()
    for nid in graph.markers():
        t = graph.nodes[nid].type
        if wanted is None or t in wanted:
            out[key(nid)] += 1
    return out


def candidate_universe(graph: Graph, network: Network) -> int:
    """Candidate count of one full-recomputation Create pass."""
    total = 0
    for m in network.modules.values():
        seen: set[int] = set()
        for c in m.positive_inputs:
            seen |= wired(graph, network, m, c, graph.nodes_of_type(c.type))
        total += len(seen)
    return total


# -- the engine ---------------------------------------------------------


class Maintainer:
    """Runs maintenance phases of one network over one graph."""

    def __init__(
        self,
        network: Network,
        graph: Graph,
        plan: ExecutionPlan | None = None,
        *,
        max_iterations: int | None = None,
        trace: bool = False,
    ):
        if graph.typegraph is not network.typegraph and graph.typegraph != network.typegraph:
            raise NetworkError("graph and network use different type graphs")
        self.network = network
        self.graph = graph
        self.plan = plan or plan_execution(network)
        self.max_iterations = max_iterations or 10 * max(1, len(network.modules))
        self.tracing = trace
        self.report = MaintenanceReport()
        self._region: Region | None = None
        self._universe = False

    def _trace(self, phase: str, module: str, nid, verb: str) -> None:
        if self.tracing:
            self.report.trace.append(f"{phase} {module} {nid} {verb}")

    # -- phases -------------------------------------------------------

    def update_phase(self, suspicious: Iterable[int]) -> set[int]:
        g = self.graph
        obsoletes: set[int] = set()
        visited: set[int] = set()
        self._trace("update", "-", "-", "begin")

        def visit(nodes: Iterable[int], force: bool = False) -> None:
            for nid in sorted(nodes):
                if nid in visited and not force:
                    continue
                visited.add(nid)
                node = g.nodes.get(nid)
                if node is None or not node.view:
                    continue
                if node.obsolete:
                    obsoletes.add(nid)
                    continue
                module = self.network.module(node.module)
                verb = update_marker(module, g, nid)
                self.report.updated += 1
                self._trace("update", module.name, nid, verb)
                if verb == OBSOLETE:
                    self.report.obsoleted += 1
                    obsoletes.add(nid)
                else:
                    if verb == REWIRED:
                        self.report.rewired += 1
                    visit(backward_marks(g, nid), force=verb == REWIRED)

        visit(suspicious)
        return obsoletes

    def delete_phase(self, obsoletes: Iterable[int]) -> set[int]:
        g = self.graph
        changed: set[int] = set()
        self._trace("delete", "-", "-", "begin")

        def visit(nodes: Iterable[int]) -> None:
            for nid in sorted(nodes):
                node = g.nodes.get(nid)
                if node is None or not node.view:
                    continue
                deps = backward_marks(g, nid)
                module = self.network.module(node.module)
                changed.update(execute_delete(module, g, {nid}))
                self.report.deleted += 1
                self._trace("delete", module.name, nid, "deleted")
                visit(deps)

        visit(obsoletes)
        return changed

    def create_phase(self, changed: Iterable[int] | None) -> set[int]:
        """Run Create over the plan; ``None`` means every node is a candidate."""
        self._trace("create", "-", "-", "begin")
        self._universe = changed is None
        self._region = None if changed is None else Region(self.graph, changed)
        suspicious: set[int] = set()
        for step in self.plan.steps:
            if step.is_cycle:
                self._run_cycle(step, suspicious)
            else:
                self._run_module(self.network.module(step.modules[0]), suspicious)
        self._region = None
        return suspicious

    def _candidates(self, module: ViewModule) -> dict[str, set[int]]:
        if self._universe:
            g = self.graph
            cands = {c.name: wired(g, self.network, module, c, g.nodes_of_type(c.type)) for c in module.positive_inputs}
        else:
            cands = self._region.candidates(module, self.network)
        self.report.candidates += len(set().union(*cands.values())) if cands else 0
        return cands

    def _run_module(self, module: ViewModule, suspicious: set[int], require_any: set[int] | None = None) -> list[int]:
        cands = self._candidates(module)
        if not all(cands.values()):
            return []
        created = execute_create(module, self.graph, cands, require_any=require_any)
        self.report.created += len(created)
        for nid in created:
            self._trace("create", module.name, nid, "created")
        if created:
            if self._region is not None:
                self._region.extend(created)
            deps = [self.network.module(d) for d in self.network.dependents(module.name)]
            suspicious |= reachability_suspicious(self.graph, created, deps)
        return created

    def _run_cycle(self, step: PlanStep, suspicious: set[int]) -> None:
        # semi-naive: after its first run a module only looks for matches
        # that use a marker created since it last ran
        fresh: dict[str, set[int] | None] = {m: None for m in step.modules}
        passes = 0
        while True:
            passes += 1
            if passes > self.max_iterations:
                raise LoopLimitError(f"recursion cycle {list(step.modules)} exceeded {self.max_iterations} passes")
            fix_created = False
            for name in step.modules:
                req = fresh[name]
                if req is not None and not req:
                    created = []
                else:
                    created = self._run_module(self.network.module(name), suspicious, req)
                fresh[name] = set()
                for other in step.modules:
                    if fresh[other] is not None:
                        fresh[other].update(created)
                if name == step.fixpoint:
                    fix_created = bool(created)
            self._trace("cycle", step.fixpoint, passes, "pass")
            if not fix_created:
                break
        self.report.cycle_iterations = max(self.report.cycle_iterations, passes)

    # -- drivers --------------------------------------------------------

    def _begin(self, events: list[ChangeEvent]) -> MaintenanceReport:
        self.report = MaintenanceReport(events=len(events))
        return self.report

    def _timed(self, phase: str, fn, arg):
        t0 = time.perf_counter()
        try:
            return fn(arg)
        finally:
            self.report.times[phase] += time.perf_counter() - t0

    def maintain(self, events: Iterable[ChangeEvent] | None = None) -> MaintenanceReport:
        """Bring the view layer up to date with a batch of base changes."""
        g = self.graph
        events = g.drain() if events is None else list(events)
        report = self._begin(events)
        if not events:
            return report
        g.busy = True
        try:
            suspicious: set[int] = set()
            first = True
            while True:
                report.iterations += 1
                if report.iterations > self.max_iterations:
                    raise LoopLimitError(f"maintenance loop exceeded {self.max_iterations} iterations")
                self._trace("loop", "-", report.iterations, "begin")
                if first:
                    self._trace("events", "-", len(events), "consumed")
                    suspicious |= suspicious_nodes(g, events)
                obsoletes = self._timed("update", self.update_phase, suspicious)
                if first:
                    obsoletes |= obsolete_nodes(g, events)
                changed = self._timed("delete", self.delete_phase, obsoletes)
                if first:
                    changed |= changed_nodes(g, events)
                suspicious = self._timed("create", self.create_phase, changed)
                first = False
                if not suspicious:
                    break
        finally:
            g.busy = False
        return report

    def batch_maintain(self) -> MaintenanceReport:
        """Full recomputation: every marker is suspicious, every node a candidate."""
        g = self.graph
        g.drain()
        report = self._begin([])
        g.busy = True
        try:
            suspicious = set(g.markers())
            first = True
            while True:
                report.iterations += 1
                if report.iterations > self.max_iterations:
                    raise LoopLimitError(f"batch loop exceeded {self.max_iterations} iterations")
                self._trace("loop", "-", report.iterations, "begin")
                obsoletes = self._timed("update", self.update_phase, suspicious)
                if first:
                    obsoletes |= {n for n in g.dangling_markers() if n in g.nodes}
                    obsoletes |= {n for n in g.markers() if g.nodes[n].obsolete}
                self._timed("delete", self.delete_phase, obsoletes)
                suspicious = self._timed("create", self.create_phase, None)
                first = False
                if not suspicious:
                    break
        finally:
            g.busy = False
        return report


def maintain(network: Network, graph: Graph, events: Iterable[ChangeEvent] | None = None, **kw) -> MaintenanceReport:
    return Maintainer(network, graph, **kw).maintain(events)


def batch_maintain(network: Network, graph: Graph, **kw) -> MaintenanceReport:
    return Maintainer(network, graph, **kw).batch_maintain()


def trace_conforms(trace: list[str]) -> bool:
    """Whether a trace follows update, delete, create in every iteration and
    consumes events at most once, in the first iteration."""
    order = {p: i for i, p in enumerate(PHASES)}
    iteration = 0
    expect = 0
    consumed = 0
    for line in trace:
        phase, _, arg, verb = line.split(" ", 3)
        if phase == "loop":
            if iteration and expect != len(PHASES):
                return False
            iteration += 1
            if arg != str(iteration):
                return False
            expect = 0
        elif phase == "events":
            if iteration != 1 or expect != 0:
                return False
            consumed += 1
        elif phase in order and verb == "begin":
            if order[phase] != expect:
                return False
            expect += 1
        elif phase in order or phase == "cycle":
            active = {"update": 1, "delete": 2, "create": 3, "cycle": 3}[phase]
            if expect != active:
                return False
        else:
            return False
    return consumed <= 1 and (iteration == 0 or expect == len(PHASES))
