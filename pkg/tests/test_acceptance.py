"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the pytest terminal summary (and immediately when
run with ``-s``).
"""
import random
import time
from collections import Counter
from contextlib import contextmanager

from oracles import check_script, multilevel_closure, generalization_pairs, transitive_pairs

from conftest import ACCEPTANCE_LINES
from gatorview.bench import bench_workload, run_once
from gatorview.graph import SCOPE, Graph
from gatorview.io import ScriptPlayer, load_workspace, workspace_path
from gatorview.maintenance import Maintainer, candidate_universe, trace_conforms, view_signature
from gatorview.network import emulate_rete
from gatorview.workloads import (
    SyntheticSpec,
    add_reference,
    chain_fixture,
    composite_fixture,
    design_network,
    example_typegraph,
    extract_interface_fixture,
    generate_synthetic,
    running_network,
)


@contextmanager
def criterion(number: int, title: str, limit_s: float | None = None):
    """Record PASS/FAIL for a criterion; a time limit is part of the check."""
    facts: dict = {}
    t0 = time.perf_counter()
    try:
        yield facts
        elapsed = time.perf_counter() - t0
        if limit_s is not None:
            assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
    except BaseException as exc:
        line = f"criterion {number} FAIL  {title}: {exc}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    detail = ", ".join(f"{k}={v}" for k, v in facts.items())
    line = f"criterion {number} PASS  {title} ({detail}; {elapsed:.2f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _types(g):
    return Counter(g.nodes[n].type for n in g.markers())


def _roles(g, marker):
    return {e.type: e.dst for e in g.out_edges(marker) if e.type != SCOPE}


def _random_spec(i: int) -> SyntheticSpec:
    r = random.Random(i)
    return SyntheticSpec(
        seed=1000 + i,
        base_nodes=r.randint(100, 500),
        occurrences={
            "Generalization": r.randint(2, 8),
            "BoundedAssociation": r.randint(1, 5),
            "UnboundedAssociation": r.randint(1, 5),
            "Composite": r.randint(1, 5),
        },
        cluster_size=r.choice([20, 40, 80]),
        edge_density=r.uniform(0.2, 1.0),
        seed_rate=r.uniform(0.3, 0.7),
        chaos=r.uniform(0.0, 0.5),
        script_length=r.randint(50, 70),
        batch_size=r.choice([1, 1, 2, 5]),
    )


def test_criterion_1_oracle_equivalence():
    with criterion(1, "incremental equals batch after every batch", 300) as facts:
        scripts = batches = 0
        failures = []
        for i in range(200):
            spec = _random_spec(i)
            ws = generate_synthetic(spec).workspace
            assert spec.base_nodes <= 500 and len(ws.script) >= 50
            problems = check_script(ws, check_trace=False)
            if problems:
                failures.append((spec.seed, problems[0]))
            scripts += 1
            batches += len(ws.batches)
        assert not failures, f"{len(failures)} scripts disagree, first: {failures[0]}"
        facts.update(scripts=scripts, batches=batches)


def test_criterion_2_running_example():
    with criterion(2, "running example end to end", 1.0) as facts:
        tg = example_typegraph()
        net = running_network(tg)
        g, ids = composite_fixture(Graph(tg))
        m = Maintainer(net, g)
        m.maintain()
        assert _types(g) == Counter({"Generalization": 1, "BoundedAssociation": 1, "Composite": 1})
        (gen,) = g.nodes_of_type("Generalization")
        (comp,) = g.nodes_of_type("Composite")
        (ba,) = g.nodes_of_type("BoundedAssociation")
        assert _roles(g, gen) == {"SubRole": ids["container"], "SuperRole": ids["component"]}
        assert _roles(g, ba) == {"Reference": ids["field"], "Target": ids["component"]}
        assert _roles(g, comp) == {
            "Composite": ids["container"],
            "Component": ids["component"],
            "Generalization": gen,
            "Association": ba,
        }
        g.delete_node(ids["dim"])
        m.maintain()
        assert _types(g) == Counter({"Generalization": 1})
        assert gen in g.nodes and _roles(g, gen) == {"SubRole": ids["container"], "SuperRole": ids["component"]}
        facts.update(markers_before=3, markers_after=1)


def test_criterion_3_recursion_fixpoint():
    with criterion(3, "multi-level generalization fix point on chains", 10.0) as facts:
        tg = example_typegraph()
        net = design_network(tg)
        worst = {}
        for k in range(2, 9):
            for mode in ("batch", "incremental"):
                g = Graph(tg)
                m = Maintainer(net, g)
                if mode == "batch":
                    g, classes = chain_fixture(k, g)
                    rep = m.batch_maintain()
                else:
                    rep = m.maintain([])
                    g, classes = chain_fixture(k, g)
                    rep = m.maintain()
                got = set()
                for n in g.nodes_of_type("MultiLevelGeneralization"):
                    r = _roles(g, n)
                    got.add((r["SubRole"], r["SuperRole"]))
                assert got == transitive_pairs(classes), f"k={k} {mode}"
                assert got == multilevel_closure(generalization_pairs(g)), f"k={k} {mode}"
                assert len(got) == g.count_of_type("MultiLevelGeneralization"), "duplicate markers"
                assert rep.cycle_iterations <= k, f"k={k} {mode}: {rep.cycle_iterations} cycle passes"
                assert rep.iterations < m.max_iterations
                worst[k] = max(worst.get(k, 0), rep.cycle_iterations)
        facts.update(chains="2..8", cycle_passes=",".join(str(worst[k]) for k in sorted(worst)))


def test_criterion_4_complex_nac():
    with criterion(4, "complex negative condition resolved in one call", 1.0) as facts:
        tg = example_typegraph()
        net = design_network(tg)
        g, ids = extract_interface_fixture(Graph(tg))
        m = Maintainer(net, g, trace=True)
        m.maintain()
        assert _types(g)["ExtractInterface"] == 1
        (ei,) = g.nodes_of_type("ExtractInterface")
        assert _roles(g, ei) == {"Candidate": ids["class"]}
        ncr, cr = add_reference(g, ids["class"], "implements", ids["interface"])
        rep = m.maintain()
        assert _types(g)["ExtractInterface"] == 0 and _types(g)["InterfaceImplementation"] == 1
        assert rep.iterations >= 2, f"only {rep.iterations} iteration(s)"
        assert trace_conforms(rep.trace)
        g.delete_node(ncr)
        rep2 = m.maintain()
        assert _types(g)["ExtractInterface"] == 1 and _types(g)["InterfaceImplementation"] == 0
        facts.update(iterations_on_insert=rep.iterations, iterations_on_removal=rep2.iterations)


def test_criterion_5_gator_vs_rete():
    with criterion(5, "Gator and emulated Rete agree; Rete stores more") as facts:
        workloads = [("running", load_workspace(workspace_path("builtin:running")))]
        for seed in (21, 22):
            spec = SyntheticSpec(
                seed=seed,
                base_nodes=400,
                occurrences={"Generalization": 8, "BoundedAssociation": 4, "UnboundedAssociation": 4, "Composite": 4},
                chaos=0.3,
                script_length=30,
                batch_size=2,
            )
            workloads.append((f"synthetic-{seed}", generate_synthetic(spec).workspace))
        rows_total = 0
        for name, ws in workloads:
            rows = bench_workload(name, ws, reps=5, warmup=1)
            assert len(rows) == 4
            by = {(r.algorithm, r.topology): r for r in rows}
            assert len({r.top_markers for r in rows}) == 1
            for r in rows:
                assert r.reps >= 5 and r.time_median_s > 0 and r.batches > 0
            for alg in ("incremental", "batch"):
                assert by[(alg, "rete")].view_nodes >= by[(alg, "gator")].view_nodes
                assert by[(alg, "rete")].intermediate_markers >= by[(alg, "gator")].intermediate_markers
            rows_total += len(rows)
        # the top-level sets themselves, not just their sizes
        ws = workloads[1][1]
        rete = emulate_rete(ws.network)
        a = run_once(ws, ws.network, "incremental")
        b = run_once(ws, rete, "incremental")
        top = sorted(ws.network.marker_types)
        assert view_signature(a.graph, a.network, top, a.player.inverse) == view_signature(b.graph, b.network, top, b.player.inverse)
        facts.update(workloads=len(workloads), rows=rows_total, rete_modules=len(rete.modules))


def test_criterion_6_candidate_reduction():
    with criterion(6, "incremental candidates and time versus batch on 10k nodes", 120) as facts:
        spec = SyntheticSpec(
            seed=11,
            base_nodes=10_000,
            occurrences={"Generalization": 150, "BoundedAssociation": 80, "UnboundedAssociation": 80, "Composite": 80},
            script_length=100,
            batch_size=1,
            chaos=0.2,
        )
        ws = generate_synthetic(spec).workspace
        assert len(ws.graph.base_node_ids()) == 10_000 and len(ws.batches) == 100
        inc = run_once(ws, ws.network, "incremental")
        bat = run_once(ws, ws.network, "batch")
        ratios = []
        for ri, rb in zip(inc.batch_reports, bat.batch_reports):
            ratios.append(ri.candidates / rb.candidates)
        total_ratio = inc.report.candidates / bat.report.candidates
        assert max(ratios) < 0.15, f"worst single-edit ratio {max(ratios):.4f}"
        assert inc.seconds < bat.seconds, f"incremental {inc.seconds:.3f}s vs batch {bat.seconds:.3f}s"
        assert view_signature(inc.graph, ws.network, rename=inc.player.inverse) == view_signature(
            bat.graph, ws.network, rename=bat.player.inverse
        )
        assert candidate_universe(bat.graph, ws.network) > 0
        facts.update(
            ratio=f"{total_ratio:.4%}",
            worst=f"{max(ratios):.4%}",
            incremental_s=f"{inc.seconds:.3f}",
            batch_s=f"{bat.seconds:.3f}",
        )


def test_criterion_7_trace_conformance():
    with criterion(7, "phase order in every maintain trace") as facts:
        calls = 0
        for network in ("running", "design"):
            for i in range(20):
                occ = {"Generalization": 4, "BoundedAssociation": 2, "UnboundedAssociation": 2, "Composite": 2}
                if network == "design":
                    occ.update(InterfaceImplementation=3, ExtractInterface=3)
                spec = SyntheticSpec(
                    seed=500 + i, base_nodes=200, occurrences=occ, chaos=0.4, script_length=30, batch_size=1 + i % 3, network=network
                )
                ws = generate_synthetic(spec).workspace
                g = ws.graph.copy(base_only=True)
                m = Maintainer(ws.network, g, trace=True)
                rep = m.batch_maintain()
                assert trace_conforms(rep.trace)
                player = ScriptPlayer(g)
                multi = 0
                for batch in ws.batches:
                    player.play(batch)
                    rep = m.maintain()
                    calls += 1
                    assert trace_conforms(rep.trace), "\n".join(rep.trace)
                    assert sum(1 for line in rep.trace if line.startswith("events ")) == 1
                    multi += rep.iterations > 1
        # exact shape of a two-iteration call
        tg = example_typegraph()
        g, ids = extract_interface_fixture(Graph(tg))
        m = Maintainer(design_network(tg), g, trace=True)
        m.maintain()
        add_reference(g, ids["class"], "implements", ids["interface"])
        skeleton = [line for line in m.maintain().trace if line.endswith((" begin", " consumed"))]
        assert skeleton == [
            "loop - 1 begin",
            "events - 5 consumed",
            "update - - begin",
            "delete - - begin",
            "create - - begin",
            "loop - 2 begin",
            "update - - begin",
            "delete - - begin",
            "create - - begin",
        ]
        facts.update(maintain_calls=calls)


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q", "-s"]))
