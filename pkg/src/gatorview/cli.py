"""Command-line entry point.

Exit codes: 0 success, 1 other failure, 2 usage, 3 parse error,
4 validation error, 5 loop limit exceeded, 6 marker mismatch.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import DEFAULT_SUITE, csv_text, load_suite, run_suite, summary, topology_network
from .errors import (
    DuplicateIdError,
    GatorError,
    LoopLimitError,
    MarkerMismatchError,
    NetworkError,
    OwnershipError,
    ParseError,
    PatternError,
    TypeGraphError,
    TypeMismatchError,
    UnknownElementError,
    UnknownTypeError,
)
from .graph import SCOPE
from .io import ScriptPlayer, dumps, load_snapshot, load_workspace, save_snapshot, save_workspace, workspace_path
from .maintenance import MaintenanceReport, Maintainer
from .network import plan_execution

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_LOOP = 5
EXIT_MISMATCH = 6

VALIDATION_ERRORS = (
    NetworkError,
    PatternError,
    TypeGraphError,
    UnknownTypeError,
    TypeMismatchError,
    DuplicateIdError,
    UnknownElementError,
    OwnershipError,
)

LOOP_LIMIT_ENV = "GATORVIEW_LOOP_LIMIT"


def _loop_limit(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    raw = os.environ.get(LOOP_LIMIT_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise NetworkError(f"{LOOP_LIMIT_ENV} must be an integer, got {raw!r}") from None
    return None


def cmd_maintain(args) -> int:
    ws = load_workspace(workspace_path(args.workspace))
    net = topology_network(ws.network, args.topology)
    g = ws.graph.copy(net.typegraph, base_only=args.topology == "rete")
    m = Maintainer(net, g, max_iterations=_loop_limit(args.max_iterations), trace=args.trace is not None)
    # the stored graph may predate maintenance; recompute once, untimed
    initial = m.batch_maintain()
    player = ScriptPlayer(g)
    reports = []
    traces = list(initial.trace)
    for batch in ws.batches:
        player.play(batch)
        rep = m.maintain() if args.mode == "incremental" else m.batch_maintain()
        reports.append(rep)
        traces += rep.trace
    total = MaintenanceReport()
    for r in reports:
        total.merge(r)
    counts: dict[str, int] = {}
    for nid in g.markers():
        t = g.nodes[nid].type
        counts[t] = counts.get(t, 0) + 1
    doc = {
        "mode": args.mode,
        "topology": args.topology,
        "initial": initial.to_dict(),
        "batches": [r.to_dict() for r in reports],
        "total": total.to_dict(),
        "markers": dict(sorted(counts.items())),
    }
    if args.snapshot:
        save_snapshot(g, args.snapshot)
    if args.report:
        Path(args.report).write_text(dumps(doc), encoding="utf-8")
    if args.trace is not None:
        text = "".join(line + "\n" for line in traces)
        if args.trace == "-":
            sys.stdout.write(text)
        else:
            Path(args.trace).write_text(text, encoding="utf-8")
    for t, c in sorted(counts.items()):
        print(f"{t}\t{c}")
    return EXIT_OK


def cmd_query(args) -> int:
    g = load_snapshot(args.snapshot)
    tg = g.typegraph
    tg.node_type(args.type)
    filters = []
    for spec in args.role or []:
        if "=" not in spec:
            raise UsageError(f"--role expects ROLE=ID, got {spec!r}")
        role, _, ident = spec.partition("=")
        tg.edge_type(role)
        try:
            filters.append((role, int(ident)))
        except ValueError:
            raise UsageError(f"--role id must be an integer, got {ident!r}") from None
    for nid in g.markers():
        node = g.nodes[nid]
        if not tg.conforms(node.type, args.type):
            continue
        roles = [(e.type, e.dst) for e in sorted(g.out_edges(nid), key=lambda e: e.id) if e.type != SCOPE]
        scopes = sorted(e.dst for e in g.out_edges(nid) if e.type == SCOPE)
        if not all((r, i) in roles for r, i in filters):
            continue
        role_text = " ".join(f"{r}={i}" for r, i in roles)
        flag = "\tobsolete" if node.obsolete else ""
        print(f"{nid}\t{node.type}\tmodule={node.module}\t{role_text}\tscopes={','.join(map(str, scopes))}{flag}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.suite:
        suite = load_suite(args.suite)
        base = Path(args.suite).parent
    else:
        suite, base = DEFAULT_SUITE, None
    rows = run_suite(suite, base=base, reps=args.reps, max_iterations=_loop_limit(args.max_iterations))
    text = csv_text(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for line in summary(rows):
        print(line, file=sys.stderr)
    return EXIT_OK


def _occurrences(items):
    out = {}
    for item in items or []:
        kind, sep, n = item.partition("=")
        if not sep:
            raise UsageError(f"--occ expects KIND=N, got {item!r}")
        try:
            out[kind] = int(n)
        except ValueError:
            raise UsageError(f"--occ count must be an integer, got {n!r}") from None
    return out


def cmd_gen(args) -> int:
    from .workloads import SyntheticSpec, generate_synthetic

    occ = _occurrences(args.occ) if args.occ else {"Generalization": 10}
    spec = SyntheticSpec(
        seed=args.seed,
        base_nodes=args.nodes,
        occurrences=occ,
        cluster_size=args.cluster_size,
        edge_density=args.density,
        seed_rate=args.seed_rate,
        chaos=args.chaos,
        script_length=args.length,
        batch_size=args.batch_size,
        network=args.network,
    )
    try:
        syn = generate_synthetic(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    save_workspace(syn.workspace, out)
    (out / "truth.json").write_text(dumps(syn.truth), encoding="utf-8")
    print(f"wrote {out} ({len(syn.workspace.graph.nodes)} base nodes, {len(syn.workspace.script)} events)")
    return EXIT_OK


def cmd_plan(args) -> int:
    ws = load_workspace(workspace_path(args.workspace))
    net = topology_network(ws.network, args.topology)
    print(plan_execution(net).dump())
    return EXIT_OK


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gatorview", description="Incremental graph view maintenance.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("maintain", help="replay a workspace's change script with maintenance after every batch")
    m.add_argument("workspace", help="workspace directory or builtin:<name>")
    m.add_argument("--mode", choices=("incremental", "batch"), default="incremental")
    m.add_argument("--topology", choices=("gator", "rete"), default="gator")
    m.add_argument("--trace", nargs="?", const="-", default=None, metavar="FILE", help="write the phase trace (stdout if no file)")
    m.add_argument("--report", default="report.json", help="report JSON path ('' to skip)")
    m.add_argument("--snapshot", default="snapshot.json", help="final snapshot path ('' to skip)")
    m.add_argument("--max-iterations", type=int, default=None)
    m.set_defaults(func=cmd_maintain)

    q = sub.add_parser("query", help="list markers of a view type in a snapshot")
    q.add_argument("snapshot")
    q.add_argument("--type", required=True, help="marker type; subtypes are included")
    q.add_argument("--role", action="append", metavar="ROLE=ID", help="keep markers whose ROLE edge targets ID")
    q.set_defaults(func=cmd_query)

    b = sub.add_parser("bench", help="run a benchmark suite and print CSV")
    b.add_argument("suite", nargs="?", help="suite JSON (default: built-in suite)")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.add_argument("--reps", type=int, default=None)
    b.add_argument("--max-iterations", type=int, default=None)
    b.set_defaults(func=cmd_bench)

    gsub = sub.add_parser("gen", help="generate a synthetic workspace")
    gsub.add_argument("out")
    gsub.add_argument("--seed", type=int, default=1)
    gsub.add_argument("--nodes", type=int, default=100)
    gsub.add_argument("--occ", action="append", metavar="KIND=N")
    gsub.add_argument("--cluster-size", type=int, default=40)
    gsub.add_argument("--density", type=float, default=0.5)
    gsub.add_argument("--seed-rate", type=float, default=0.5)
    gsub.add_argument("--chaos", type=float, default=0.0)
    gsub.add_argument("--length", type=int, default=0)
    gsub.add_argument("--batch-size", type=int, default=1)
    gsub.add_argument("--network", choices=("running", "design"), default="running")
    gsub.set_defaults(func=cmd_gen)

    pl = sub.add_parser("plan", help="print the execution plan of a workspace network")
    pl.add_argument("workspace")
    pl.add_argument("--topology", choices=("gator", "rete"), default="gator")
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gatorview: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"gatorview: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except VALIDATION_ERRORS as exc:
        print(f"gatorview: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LoopLimitError as exc:
        print(f"gatorview: loop limit: {exc}", file=sys.stderr)
        return EXIT_LOOP
    except MarkerMismatchError as exc:
        print(f"gatorview: marker mismatch: {exc}", file=sys.stderr)
        print(json.dumps(exc.diff, indent=1), file=sys.stderr)
        return EXIT_MISMATCH
    except (GatorError, OSError) as exc:
        print(f"gatorview: error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
