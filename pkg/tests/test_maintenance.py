from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_matches, check_script, multilevel_closure, generalization_pairs, transitive_pairs

from gatorview.errors import LoopLimitError
from gatorview.graph import BASE, SCOPE, Graph
from gatorview.io import ScriptPlayer
from gatorview.maintenance import (
    MaintenanceReport,
    Maintainer,
    batch_maintain,
    candidate_universe,
    changed_nodes,
    maintain,
    obsolete_nodes,
    reachability_missing,
    reachability_suspicious,
    suspicious_nodes,
    trace_conforms,
    view_signature,
)
from gatorview.pattern import execute_create, set_obsolete
from gatorview.workloads import (
    NCR,
    SyntheticSpec,
    add_reference,
    chain_fixture,
    composite_fixture,
    design_workspace,
    example_patterns,
    extract_interface_fixture,
    generate_synthetic,
    running_workspace,
)

P = example_patterns()


def _one(g, t):
    (m,) = [n for n in g.markers() if g.nodes[n].type == t]
    return m


def _types(g):
    return Counter(g.nodes[n].type for n in g.markers())


# -- event classification -------------------------------------------------------


def test_suspicious_attribute_change(tg, running):
    g, classes = chain_fixture(1, Graph(tg))
    batch_maintain(running, g)
    gen = _one(g, "Generalization")
    g.set_attr(classes[0], "name", "Renamed")
    assert suspicious_nodes(g, g.drain()) == {gen}


def test_suspicious_edge_between_unmarked(tg):
    g = Graph(tg)
    a = g.add_node("Class")
    n = g.add_node(NCR)
    g.drain()
    g.add_edge("extends", a, n)
    assert suspicious_nodes(g, g.drain()) == set()


def test_suspicious_edge_removed_in_association(tg, running):
    g, ids = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    ba = _one(g, "BoundedAssociation")
    g.drain()
    g.remove_edge(g.find_edge(ids["field"], ids["f_ncr"], "typeReference"))
    expect = {e.src for e in g.edges.values() if e.layer != BASE and e.dst in (ids["field"], ids["f_ncr"])}
    got = suspicious_nodes(g, g.drain())
    assert got == expect and ba in got


def test_obsolete_nodes(tg, running):
    g, ids = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    gen = _one(g, "Generalization")
    comp = _one(g, "Composite")
    g.drain()
    lonely = g.add_node("Class")
    g.delete_node(lonely)
    assert obsolete_nodes(g, g.drain()) == set()
    g.delete_node(ids["g_ncr"])
    assert obsolete_nodes(g, g.drain()) == {gen}
    # deleting a reused view node directly
    g2, _ = composite_fixture(Graph(tg))
    batch_maintain(running, g2)
    gen2, comp2 = _one(g2, "Generalization"), _one(g2, "Composite")
    g2.drain()
    g2.delete_node(gen2)
    events = g2.drain()
    assert obsolete_nodes(g2, events) == {comp2}
    assert comp != gen


def test_changed_nodes(tg):
    g = Graph(tg)
    a = g.add_node("Class")
    b = g.add_node(NCR)
    g.add_edge("extends", a, b)
    assert changed_nodes(g, g.drain()) == {a, b}


def _component(g, start):
    seen, stack = {start}, [start]
    while stack:
        n = stack.pop()
        for e in g.edges.values():
            for x, y in ((e.src, e.dst), (e.dst, e.src)):
                if x == n and y not in seen and y in g.nodes:
                    seen.add(y)
                    stack.append(y)
    return seen


def test_reachability_missing(tg, running):
    g, _ = chain_fixture(3, Graph(tg))
    other, _ = chain_fixture(1, g)
    new = g.add_node("Class", name="New")
    ncr, _ = add_reference(g, new, "extends", 1)
    mod = running.module("Generalization")
    got = reachability_missing(g, {new}, mod)
    comp = _component(g, new)
    assert got["Class"] == {n for n in comp if g.nodes[n].type == "Class"}
    assert got["TypeReference"] == {n for n in comp if tg.conforms(g.nodes[n].type, "TypeReference")}
    assert all(not v for v in reachability_missing(g, set(), mod).values())
    dim = g.add_node("ArrayDimension")
    assert all(not v for v in reachability_missing(g, {dim}, mod).values())


def _ei_graph(tg, design):
    g, ids = extract_interface_fixture(Graph(tg))
    batch_maintain(design, g)
    return g, ids


def test_reachability_suspicious(tg, design):
    g, ids = _ei_graph(tg, design)
    ei = _one(g, "ExtractInterface")
    add_reference(g, ids["class"], "implements", ids["interface"])
    created = execute_create(design.module("InterfaceImplementation"), g, None)
    assert len(created) == 1
    assert reachability_suspicious(g, created, [design.module("ExtractInterface")]) == {ei}
    assert reachability_suspicious(g, [], [design.module("ExtractInterface")]) == set()
    assert reachability_suspicious(g, created, [design.module("Composite")]) == set()


# -- phases ---------------------------------------------------------------------


def test_update_phase(tg, running):
    g, ids = composite_fixture(Graph(tg))
    m = Maintainer(running, g)
    m.batch_maintain()
    gen, comp = _one(g, "Generalization"), _one(g, "Composite")
    assert m.update_phase({gen}) == set()
    # valid Generalization whose dependent Composite lost its members edge
    g.remove_edge(ids["members_edge"])
    assert m.update_phase({gen}) == {comp}
    # invalid Generalization: only it is returned
    g2, ids2 = composite_fixture(Graph(tg))
    m2 = Maintainer(running, g2)
    m2.batch_maintain()
    gen2 = _one(g2, "Generalization")
    g2.remove_edge(g2.find_edge(ids2["g_ncr"], ids2["g_cr"], "classifierReferences"))
    assert m2.update_phase({gen2}) == {gen2}


def test_delete_phase(tg, running):
    g, classes = chain_fixture(1, Graph(tg))
    m = Maintainer(running, g)
    m.batch_maintain()
    gen = _one(g, "Generalization")
    marked = {e.dst for e in g.out_edges(gen)}
    assert len(marked) == 4
    set_obsolete(g, gen)
    assert m.delete_phase({gen}) == marked
    assert m.delete_phase(set()) == set()

    g2, ids = composite_fixture(Graph(tg))
    m2 = Maintainer(running, g2)
    m2.batch_maintain()
    gen2, comp2 = _one(g2, "Generalization"), _one(g2, "Composite")
    expect = {e.dst for e in g2.out_edges(gen2)} | {e.dst for e in g2.out_edges(comp2)}
    set_obsolete(g2, gen2)
    changed = m2.delete_phase({gen2})
    assert comp2 not in g2.nodes and gen2 not in g2.nodes
    assert changed == expect


def test_create_phase(tg, design):
    g = Graph(tg)
    m = Maintainer(design, g)
    assert m.create_phase(set()) == set()
    assert g.markers() == []
    g, classes = chain_fixture(2, g)
    m.create_phase(set(classes))
    mlg = [n for n in g.markers() if g.nodes[n].type == "MultiLevelGeneralization"]
    assert len(mlg) == 1
    roles = {e.type: e.dst for e in g.out_edges(mlg[0]) if e.type != SCOPE}
    assert (roles["SubRole"], roles["SuperRole"]) == (classes[0], classes[2])
    # ExtractInterface becomes suspicious once an InterfaceImplementation appears
    g3, ids = _ei_graph(tg, design)
    ei = _one(g3, "ExtractInterface")
    ncr, cr = add_reference(g3, ids["class"], "implements", ids["interface"])
    m3 = Maintainer(design, g3)
    assert m3.create_phase({ncr}) == {ei}


# -- full loop --------------------------------------------------------------------


def test_empty_batch(tg, running):
    g, _ = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    before = view_signature(g, running)
    g.drain()
    rep = maintain(running, g, [])
    assert rep.iterations == 0 and rep.created == rep.deleted == rep.updated == rep.candidates == 0
    assert view_signature(g, running) == before


def test_single_edge_completes_composite(running):
    ws = running_workspace()
    g = ws.graph.copy(base_only=True)
    m = Maintainer(running, g)
    m.batch_maintain()
    assert _types(g) == Counter({"Generalization": 1, "BoundedAssociation": 1})
    player = ScriptPlayer(g)
    player.play(ws.batches[0])
    rep = m.maintain()
    assert rep.iterations == 1 and rep.created == 1
    assert _types(g)["Composite"] == 1
    fresh = g.copy(base_only=True)
    batch_maintain(running, fresh)
    assert view_signature(g, running) == view_signature(fresh, running)


def test_complex_nac_two_iterations(design):
    ws = design_workspace()
    g = ws.graph.copy(base_only=True)
    m = Maintainer(design, g, trace=True)
    m.batch_maintain()
    assert _types(g)["ExtractInterface"] == 1
    player = ScriptPlayer(g)
    player.play(ws.batches[0])
    rep = m.maintain()
    assert rep.iterations == 2
    assert _types(g)["ExtractInterface"] == 0 and _types(g)["InterfaceImplementation"] == 1
    assert trace_conforms(rep.trace)
    fresh = g.copy(base_only=True)
    batch_maintain(design, fresh)
    assert view_signature(g, design) == view_signature(fresh, design)


def test_batch_examples(tg, running):
    g = Graph(tg)
    batch_maintain(running, g)
    assert g.markers() == []
    g, ids = composite_fixture(g)
    batch_maintain(running, g)
    assert _types(g) == Counter({"Generalization": 1, "BoundedAssociation": 1, "Composite": 1})
    for name in ("Generalization", "BoundedAssociation"):
        assert len(brute_matches(g, P[name])) == 1
    comp = _one(g, "Composite")
    roles = {e.type: e.dst for e in g.out_edges(comp) if e.type != SCOPE}
    assert roles["Composite"] == ids["container"] and roles["Component"] == ids["component"]


def test_batch_repairs_corruption(tg, running):
    g, ids = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    clean = view_signature(g, running)
    # a stale marker with wrong roles, an obsolete one, and a missing one
    stale = g.new_marker("Generalization", "Generalization")
    g.link(stale.id, "SubRole", ids["component"])
    g.link(stale.id, "SuperRole", ids["container"])
    g.link(stale.id, SCOPE, ids["g_ncr"])
    g.link(stale.id, SCOPE, ids["g_cr"])
    flagged = g.new_marker("BoundedAssociation", "BoundedAssociation")
    flagged.obsolete = True
    g.drop_marker(_one(g, "Composite"))
    assert view_signature(g, running) != clean
    batch_maintain(running, g)
    assert view_signature(g, running) == clean
    assert stale.id not in g.nodes and flagged.id not in g.nodes


def test_delete_dimension_keeps_generalization(tg, running):
    g, ids = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    gen = _one(g, "Generalization")
    g.drain()
    g.delete_node(ids["dim"])
    rep = maintain(running, g)
    assert _types(g) == Counter({"Generalization": 1})
    assert gen in g.nodes
    assert rep.deleted == 2


def test_user_deleted_marker_is_recreated(tg, running):
    g, _ = composite_fixture(Graph(tg))
    batch_maintain(running, g)
    before = view_signature(g, running)
    g.drain()
    g.delete_node(_one(g, "Generalization"))
    maintain(running, g)
    assert view_signature(g, running) == before


def test_multilevel_chain(tg, design):
    for k in range(2, 9):
        g, classes = chain_fixture(k, Graph(tg))
        rep = batch_maintain(design, g)
        got = set()
        for n in g.markers():
            if g.nodes[n].type == "MultiLevelGeneralization":
                r = {e.type: e.dst for e in g.out_edges(n) if e.type != SCOPE}
                got.add((r["SubRole"], r["SuperRole"]))
        assert got == transitive_pairs(classes) == multilevel_closure(generalization_pairs(g))
        assert rep.cycle_iterations <= k


def test_loop_limit(tg, design):
    g, _ = chain_fixture(8, Graph(tg))
    with pytest.raises(LoopLimitError):
        batch_maintain(design, g, max_iterations=2)


def test_report_dict(tg, running):
    g, _ = composite_fixture(Graph(tg))
    rep = batch_maintain(running, g, trace=True)
    d = rep.to_dict()
    assert "trace" not in d and d["created"] == 3 and set(d["times"]) == {"update", "delete", "create"}
    total = MaintenanceReport()
    total.merge(rep)
    total.merge(rep)
    assert total.created == 6 and len(total.trace) == 2 * len(rep.trace)


def test_trace_conforms_rejects_bad_order():
    good = ["loop - 1 begin", "events - 2 consumed", "update - - begin", "delete - - begin", "create - - begin"]
    assert trace_conforms(good)
    assert not trace_conforms(["loop - 1 begin", "delete - - begin", "update - - begin", "create - - begin"])
    assert not trace_conforms(good + ["loop - 2 begin", "events - 1 consumed", "update - - begin", "delete - - begin", "create - - begin"])


# -- properties -------------------------------------------------------------------


@given(seed=st.integers(0, 100_000), network=st.sampled_from(["running", "design"]), batch=st.sampled_from([1, 4]))
def test_incremental_equals_batch(seed, network, batch):
    occ = {"Generalization": 4, "BoundedAssociation": 2, "UnboundedAssociation": 2, "Composite": 2}
    if network == "design":
        occ.update(InterfaceImplementation=2, ExtractInterface=2)
    syn = generate_synthetic(
        SyntheticSpec(seed=seed, base_nodes=150, occurrences=occ, cluster_size=30, chaos=0.4, script_length=20, batch_size=batch, network=network)
    )
    assert check_script(syn.workspace) == []


@given(seed=st.integers(0, 100_000))
def test_candidates_within_universe(running, seed):
    syn = generate_synthetic(
        SyntheticSpec(seed=seed, base_nodes=200, occurrences={"Generalization": 5, "Composite": 3}, script_length=10)
    )
    ws = syn.workspace
    g = ws.graph.copy(base_only=True)
    m = Maintainer(running, g)
    m.batch_maintain()
    player = ScriptPlayer(g)
    for b in ws.batches:
        player.play(b)
        rep = m.maintain()
        assert rep.iterations < m.max_iterations
        if rep.iterations == 1:
            assert rep.candidates <= candidate_universe(g, running)
