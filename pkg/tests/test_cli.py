import csv
import io
import json
from collections import Counter


from gatorview import cli
from gatorview.io import load_snapshot, load_workspace, save_workspace, workspace_path
from gatorview.maintenance import view_signature
from gatorview.workloads import design_workspace, running_workspace


def run(argv, capsys):
    rc = cli.main(argv)
    out, err = capsys.readouterr()
    return rc, out, err


def _maintain(tmp_path, capsys, *extra, ws="builtin:running", tag="a"):
    snap = tmp_path / f"{tag}.snapshot.json"
    rep = tmp_path / f"{tag}.report.json"
    rc, out, err = run(["maintain", ws, "--snapshot", str(snap), "--report", str(rep), *extra], capsys)
    return rc, out, err, snap, rep


def test_maintain_incremental_and_batch_agree(tmp_path, capsys):
    rc, out, _, snap_i, rep = _maintain(tmp_path, capsys, tag="inc")
    assert rc == 0
    assert "Composite\t1" in out
    rc, _, _, snap_b, _ = _maintain(tmp_path, capsys, "--mode", "batch", tag="bat")
    assert rc == 0
    net = load_workspace(workspace_path("builtin:running")).network
    gi, gb = load_snapshot(snap_i), load_snapshot(snap_b)
    assert view_signature(gi, net) == view_signature(gb, net)
    assert Counter(gi.nodes[n].type for n in gi.markers())["Composite"] == 1
    report = json.loads(rep.read_text(encoding="utf-8"))
    assert len(report["batches"]) == 3 and report["markers"]["Composite"] == 1


def test_maintain_trace(tmp_path, capsys):
    trace = tmp_path / "trace.txt"
    rc, *_ = _maintain(tmp_path, capsys, "--trace", str(trace))
    assert rc == 0
    lines = trace.read_text(encoding="utf-8").splitlines()
    assert "update - - begin" in lines and any(line.startswith("create Composite ") for line in lines)


def test_maintain_rete(tmp_path, capsys):
    rc, out, *_ = _maintain(tmp_path, capsys, "--topology", "rete")
    assert rc == 0 and "Composite\t1" in out
    rc, _, err, *_ = _maintain(tmp_path, capsys, "--topology", "rete", ws="builtin:design")
    assert rc == cli.EXIT_VALIDATION and "acyclic" in err


def test_snapshots_are_reproducible(tmp_path, capsys):
    _, _, _, a, _ = _maintain(tmp_path, capsys, tag="one")
    _, _, _, b, _ = _maintain(tmp_path, capsys, tag="two")
    assert a.read_bytes() == b.read_bytes()


def test_query(tmp_path, capsys):
    _, _, _, snap, _ = _maintain(tmp_path, capsys)
    rc, out, _ = run(["query", str(snap), "--type", "Composite"], capsys)
    assert rc == 0
    (row,) = out.splitlines()
    for role in ("Composite=", "Component=", "Generalization=", "Association="):
        assert role in row
    g = load_snapshot(snap)
    component = next(n.id for n in g.nodes.values() if n.attrs.get("name") == "Component")
    rc, out, _ = run(["query", str(snap), "--type", "Generalization", "--role", f"SuperRole={component}"], capsys)
    assert rc == 0 and len(out.splitlines()) == 1
    rc, out, _ = run(["query", str(snap), "--type", "Generalization", "--role", "SuperRole=999999"], capsys)
    assert rc == 0 and out == ""
    rc, _, _ = run(["query", str(snap), "--type", "NoSuchType"], capsys)
    assert rc == cli.EXIT_VALIDATION
    rc, _, _ = run(["query", str(snap), "--type", "Generalization", "--role", "bad"], capsys)
    assert rc == cli.EXIT_USAGE


def test_query_empty_view(tmp_path, capsys):
    ws = running_workspace()
    from gatorview.io import save_snapshot

    save_snapshot(ws.graph, tmp_path / "g.json")
    rc, out, _ = run(["query", str(tmp_path / "g.json"), "--type", "Composite"], capsys)
    assert rc == 0 and out == ""


def test_plan(capsys):
    rc, out, _ = run(["plan", "builtin:design"], capsys)
    assert rc == 0 and "fix point: MultiLevelGeneralization" in out


def test_parse_error_exit(tmp_path, capsys):
    save_workspace(running_workspace(), tmp_path)
    (tmp_path / "network.json").write_text("{ oops", encoding="utf-8")
    rc, _, err = run(["maintain", str(tmp_path), "--snapshot", "", "--report", ""], capsys)
    assert rc == cli.EXIT_PARSE and "network.json:1:" in err


def test_loop_limit_exit(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.LOOP_LIMIT_ENV, "1")
    rc, _, err, *_ = _maintain(tmp_path, capsys, ws="builtin:design")
    assert rc == cli.EXIT_LOOP


def test_usage_exit(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["maintain", "x", "--mode", "sideways"]) == cli.EXIT_USAGE
    capsys.readouterr()


def test_bench_empty_suite(tmp_path, capsys):
    (tmp_path / "suite.json").write_text('{"workloads": []}', encoding="utf-8")
    rc, out, _ = run(["bench", str(tmp_path / "suite.json")], capsys)
    assert rc == 0
    assert out.splitlines() == [",".join(cli_columns())]


def cli_columns():
    from gatorview.bench import CSV_COLUMNS

    return CSV_COLUMNS


def test_bench_running_suite(tmp_path, capsys):
    suite = {"reps": 5, "warmup": 1, "workloads": [{"id": "running", "workspace": "builtin:running"}]}
    (tmp_path / "suite.json").write_text(json.dumps(suite), encoding="utf-8")
    rc, out, err = run(["bench", str(tmp_path / "suite.json"), "--out", str(tmp_path / "o.csv")], capsys)
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "o.csv").read_text(encoding="utf-8"))))
    assert len(rows) == 4
    assert {(r["algorithm"], r["topology"]) for r in rows} == {(a, t) for a in ("incremental", "batch") for t in ("gator", "rete")}
    assert len({r["top_markers"] for r in rows}) == 1
    assert all(int(r["reps"]) == 5 and float(r["time_median_s"]) > 0 for r in rows)
    assert "agree" in err


def test_bench_relative_workspace(tmp_path, capsys):
    save_workspace(running_workspace(), tmp_path / "ws")
    suite = {"reps": 1, "warmup": 0, "algorithms": ["incremental"], "topologies": ["gator"], "workloads": [{"workspace": "ws"}]}
    (tmp_path / "suite.json").write_text(json.dumps(suite), encoding="utf-8")
    rc, out, _ = run(["bench", str(tmp_path / "suite.json")], capsys)
    assert rc == 0 and len(out.splitlines()) == 2


def test_bench_mismatch_exit(tmp_path, capsys, monkeypatch):
    import gatorview.bench as bench

    calls = {"n": 0}

    def fake(result, top):
        calls["n"] += 1
        return Counter({("X", calls["n"]): 1})

    monkeypatch.setattr(bench, "top_signature", fake)
    suite = {"reps": 1, "warmup": 0, "workloads": [{"workspace": "builtin:running"}]}
    (tmp_path / "suite.json").write_text(json.dumps(suite), encoding="utf-8")
    rc, _, err = run(["bench", str(tmp_path / "suite.json")], capsys)
    assert rc == cli.EXIT_MISMATCH and "only_" in err


def test_gen(tmp_path, capsys):
    out_dir = tmp_path / "g"
    rc, out, _ = run(["gen", str(out_dir), "--seed", "1", "--nodes", "100", "--occ", "Generalization=10", "--length", "5"], capsys)
    assert rc == 0
    truth = json.loads((out_dir / "truth.json").read_text(encoding="utf-8"))
    assert truth["Generalization"] == 10
    rc, out, _ = _maintain(tmp_path, capsys, "--mode", "batch", ws=str(out_dir))[:3]
    assert rc == 0
    rc, _, _ = run(["gen", str(tmp_path / "h"), "--seed", "1", "--nodes", "100", "--occ", "Generalization=10", "--length", "5"], capsys)
    for f in ("graph.json", "script.jsonl"):
        assert (out_dir / f).read_bytes() == (tmp_path / "h" / f).read_bytes()
    rc, _, _ = run(["gen", str(tmp_path / "x"), "--occ", "Nope=1"], capsys)
    assert rc == cli.EXIT_USAGE


def test_design_workspace_cli_matches_batch(tmp_path, capsys):
    save_workspace(design_workspace(), tmp_path / "d")
    rc, out, *_ = _maintain(tmp_path, capsys, ws=str(tmp_path / "d"))
    assert rc == 0 and "ExtractInterface\t1" in out and "MultiLevelGeneralization\t6" in out
