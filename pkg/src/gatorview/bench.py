"""Benchmark harness: incremental vs batch maintenance on Gator vs Rete networks.

Each workload is replayed once per cell (algorithm x topology).  A run
starts from the base layer, brings the view layer up to date untimed, then
times maintenance only (monotonic clock) after every script batch.  The
reported time is the median over the repetitions that follow the warm-up
runs.
"""
from __future__ import annotations

import csv
import io as _io
import statistics
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, TextIO

from .errors import MarkerMismatchError, ParseError
from .graph import Graph
from .io import ScriptPlayer, Workspace, group_batches, load_workspace, parse_json, workspace_path
from .maintenance import Maintainer, MaintenanceReport, view_signature
from .network import Network, emulate_rete

ALGORITHMS = ("incremental", "batch")
TOPOLOGIES = ("gator", "rete")


@dataclass
class BenchmarkRow:
    workload: str
    algorithm: str
    topology: str
    reps: int
    batches: int
    time_median_s: float
    time_per_batch_s: float
    top_markers: int
    view_nodes: int
    intermediate_markers: int
    candidates: int
    loop_iterations: int


CSV_COLUMNS = tuple(f.name for f in fields(BenchmarkRow))


@dataclass
class RunResult:
    seconds: float
    graph: Graph
    network: Network
    player: ScriptPlayer
    report: MaintenanceReport
    batch_reports: list[MaintenanceReport]


def topology_network(network: Network, topology: str) -> Network:
    if topology == "gator":
        return network
    if topology == "rete":
        return emulate_rete(network)
    raise ValueError(f"unknown topology {topology!r}")


def run_once(ws: Workspace, network: Network, algorithm: str, *, max_iterations: int | None = None) -> RunResult:
    """Replay ``ws.script`` with one algorithm; time maintenance only."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    g = ws.graph.copy(network.typegraph, base_only=True)
    m = Maintainer(network, g, max_iterations=max_iterations)
    m.batch_maintain()
    player = ScriptPlayer(g)
    total = MaintenanceReport()
    per_batch = []
    elapsed = 0.0
    for batch in group_batches(ws.script):
        player.play(batch)
        t0 = time.perf_counter()
        rep = m.maintain() if algorithm == "incremental" else m.batch_maintain()
        elapsed += time.perf_counter() - t0
        total.merge(rep)
        per_batch.append(rep)
    return RunResult(elapsed, g, network, player, total, per_batch)


def top_signature(result: RunResult, top_types: Iterable[str]):
    return view_signature(result.graph, result.network, list(top_types), result.player.inverse)


def bench_workload(
    name: str,
    ws: Workspace,
    *,
    reps: int = 5,
    warmup: int = 1,
    algorithms: Iterable[str] = ALGORITHMS,
    topologies: Iterable[str] = TOPOLOGIES,
    max_iterations: int | None = None,
) -> list[BenchmarkRow]:
    """One row per cell; raises MarkerMismatchError if cells disagree."""
    top = sorted(ws.network.marker_types)
    rows = []
    reference = None
    for topology in topologies:
        net = topology_network(ws.network, topology)
        for algorithm in algorithms:
            times = []
            last = None
            for i in range(warmup + reps):
                res = run_once(ws, net, algorithm, max_iterations=max_iterations)
                sig = top_signature(res, top)
                if reference is None:
                    reference = (sig, f"{algorithm}/{topology}")
                elif sig != reference[0]:
                    diff = {"only_" + reference[1]: sorted(map(repr, reference[0] - sig)), f"only_{algorithm}/{topology}": sorted(map(repr, sig - reference[0]))}
                    raise MarkerMismatchError(f"workload {name!r}: {algorithm}/{topology} disagrees with {reference[1]}", diff)
                if i >= warmup:
                    times.append(res.seconds)
                last = res
            nb = len(last.batch_reports)
            view_nodes = len(last.graph.markers())
            top_count = sum(reference[0].values())
            med = statistics.median(times) if times else 0.0
            rows.append(
                BenchmarkRow(
                    name,
                    algorithm,
                    topology,
                    len(times),
                    nb,
                    med,
                    med / nb if nb else 0.0,
                    top_count,
                    view_nodes,
                    view_nodes - top_count,
                    last.report.candidates,
                    last.report.iterations,
                )
            )
    return rows


def load_suite(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(path), f"cannot read: {exc.strerror or exc}") from None
    suite = parse_json(text, str(path))
    if not isinstance(suite, dict):
        raise ParseError(str(path), "suite must be a JSON object")
    return suite


def resolve_workload(entry: Mapping[str, Any], base: Path | None = None) -> tuple[str, Workspace]:
    from .workloads import SyntheticSpec, generate_synthetic

    if "synthetic" in entry:
        params = dict(entry["synthetic"])
        spec = SyntheticSpec(**params)
        return entry.get("id", f"synthetic-{spec.seed}"), generate_synthetic(spec).workspace
    if "workspace" in entry:
        ref = str(entry["workspace"])
        path = workspace_path(ref)
        if not ref.startswith("builtin:") and base is not None and not path.is_absolute():
            path = base / path
        return entry.get("id", ref), load_workspace(path)
    raise ParseError("<suite>", f"workload entry needs 'workspace' or 'synthetic': {dict(entry)}")


def run_suite(suite: Mapping[str, Any], *, base: Path | None = None, reps: int | None = None, max_iterations=None) -> list[BenchmarkRow]:
    rows: list[BenchmarkRow] = []
    for entry in suite.get("workloads", []):
        name, ws = resolve_workload(entry, base)
        rows += bench_workload(
            name,
            ws,
            reps=reps if reps is not None else int(suite.get("reps", 5)),
            warmup=int(suite.get("warmup", 1)),
            algorithms=suite.get("algorithms", ALGORITHMS),
            topologies=suite.get("topologies", TOPOLOGIES),
            max_iterations=max_iterations,
        )
    return rows


DEFAULT_SUITE = {
    "reps": 5,
    "warmup": 1,
    "workloads": [
        {"id": "running", "workspace": "builtin:running"},
        {
            "id": "synthetic-2k",
            "synthetic": {
                "seed": 7,
                "base_nodes": 2000,
                "occurrences": {"Generalization": 40, "BoundedAssociation": 20, "UnboundedAssociation": 20, "Composite": 20},
                "script_length": 40,
                "chaos": 0.2,
            },
        },
    ],
}


def write_csv(rows: Iterable[BenchmarkRow], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r)
        w.writerow([f"{d[c]:.6f}" if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS])


def csv_text(rows: Iterable[BenchmarkRow]) -> str:
    buf = _io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def summary(rows: list[BenchmarkRow]) -> list[str]:
    lines = []
    for name in dict.fromkeys(r.workload for r in rows):
        cells = [r for r in rows if r.workload == name]
        counts = {r.top_markers for r in cells}
        lines.append(f"{name}: {len(cells)} cells agree on {counts.pop()} top-level markers")
        by = {(r.algorithm, r.topology): r for r in cells}
        inc, bat = by.get(("incremental", "gator")), by.get(("batch", "gator"))
        if inc and bat and bat.candidates:
            lines.append(f"{name}: incremental/batch candidate ratio {inc.candidates / bat.candidates:.4f}")
    return lines
