import csv
import random

import pytest

import cli
from bd_store import HEADER_SIZE
from cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED, main
from conftest import FIXTURES, make_graph
from graph_core import save_edge_list, small_world_graph
from oracle import oracle_scores, scores_close
from state import EngineState


def write_graph(tmp_path, name):
    path = tmp_path / f"{name}.txt"
    save_edge_list(make_graph(name), path)
    return path


def init_state(tmp_path, name, workers=1):
    state_dir = tmp_path / "state"
    assert main(["init", str(write_graph(tmp_path, name)), str(state_dir), "--workers", str(workers)]) == EXIT_OK
    return state_dir


def test_init_writes_scores(tmp_path):
    state_dir = init_state(tmp_path, "p3")
    rows = (state_dir / "scores.csv").read_text().splitlines()
    assert "v,1,2.0" in rows
    assert "e,0,1,4.0" in rows
    assert (state_dir / "stores" / "part-000.sbc").stat().st_size == HEADER_SIZE + 3 * 3 * 11


def test_init_partitions_into_store_files(tmp_path):
    state_dir = init_state(tmp_path, "barbell", workers=4)
    state = EngineState.load(state_dir)
    assert len(list((state_dir / "stores").glob("*.sbc"))) == 4
    assert [(p.lo, p.hi) for p in state.partitions] == [(0, 2), (2, 4), (4, 5), (5, 6)]


def test_init_refuses_existing_state(tmp_path):
    state_dir = init_state(tmp_path, "p3")
    assert main(["init", str(tmp_path / "p3.txt"), str(state_dir)]) == EXIT_USAGE


def test_apply_closes_triangle(tmp_path):
    state_dir = init_state(tmp_path, "p3")
    stream = tmp_path / "stream.txt"
    stream.write_text("+ 0 2 0.5\n")
    assert main(["apply", str(state_dir), str(stream)]) == EXIT_OK
    state = EngineState.load(state_dir)
    assert state.graph.m == 3
    assert scores_close(state.scores, oracle_scores(state.graph), rel=1e-9)
    with open(state_dir / "latency.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows[0]["op"] == "+"


def test_apply_stops_at_bad_line(tmp_path, caplog):
    state_dir = init_state(tmp_path, "p4")
    stream = tmp_path / "stream.txt"
    stream.write_text("+ 0 3\n# comment\n- 0 2\n+ 1 3\n")
    assert main(["apply", str(state_dir), str(stream)]) == EXIT_USAGE
    assert "line 3" in caplog.text
    state = EngineState.load(state_dir)
    assert state.graph.has_edge(0, 3)
    assert not state.graph.has_edge(1, 3)
    assert scores_close(state.scores, oracle_scores(state.graph), rel=1e-9)


def test_apply_adds_and_isolates_vertices(tmp_path):
    state_dir = init_state(tmp_path, "p3")
    stream = tmp_path / "stream.txt"
    stream.write_text("+ 2 new\n+ x1 x2\nx 1\n")
    assert main(["apply", str(state_dir), str(stream)]) == EXIT_OK
    state = EngineState.load(state_dir)
    assert state.labels == ["0", "1", "2", "new", "x1", "x2"]
    assert state.graph.degree(1) == 0
    assert state.graph.has_edge(4, 5)
    assert main(["verify", str(state_dir)]) == EXIT_OK


def test_apply_online_report(tmp_path, capsys):
    state_dir = init_state(tmp_path, "c5")
    stream = tmp_path / "stream.txt"
    stream.write_text("+ 0 2 0\n+ 1 3 100\n")
    assert main(["apply", str(state_dir), str(stream), "--online-report"]) == EXIT_OK
    assert "online: missed=0/2" in capsys.readouterr().out


def test_apply_with_more_workers(tmp_path):
    state_dir = init_state(tmp_path, "barbell", workers=1)
    stream = tmp_path / "stream.txt"
    stream.write_text("- 2 3\n")
    assert main(["apply", str(state_dir), str(stream), "--workers", "3"]) == EXIT_OK
    state = EngineState.load(state_dir)
    assert len(state.partitions) == 3
    assert len(list((state_dir / "stores").glob("*.sbc"))) == 3
    assert main(["verify", str(state_dir)]) == EXIT_OK


def test_verify_fresh_state(tmp_path, capsys):
    state_dir = init_state(tmp_path, "kite", workers=2)
    assert main(["verify", str(state_dir)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_verify_locates_corruption(tmp_path, capsys):
    state_dir = init_state(tmp_path, "p3")
    path = state_dir / "stores" / "part-000.sbc"
    raw = bytearray(path.read_bytes())
    raw[HEADER_SIZE + 2] = 1          # d of vertex 2 from source 0
    path.write_bytes(bytes(raw))
    assert main(["verify", str(state_dir)]) == EXIT_VERIFY_FAILED
    assert "FAIL source 0 vertex 2" in capsys.readouterr().out


def test_top_edges_and_vertices(tmp_path, capsys):
    state_dir = init_state(tmp_path, "barbell")
    capsys.readouterr()
    assert main(["top", str(state_dir), "-k", "1", "--edges"]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert rows[1] == "1,2,3,18.0"
    assert main(["top", str(state_dir), "-k", "100", "--vertices"]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert len(rows) == 1 + 6
    assert rows[1].split(",")[1] in ("2", "3")


def test_top_star_center(tmp_path, capsys):
    state_dir = init_state(tmp_path, "star")
    capsys.readouterr()
    assert main(["top", str(state_dir), "-k", "1"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1] == "1,0,12.0"


def test_top_rejects_zero(tmp_path):
    state_dir = init_state(tmp_path, "p3")
    assert main(["top", str(state_dir), "-k", "0"]) == EXIT_USAGE


def test_gn_with_reference(tmp_path, capsys):
    state_dir = init_state(tmp_path, "barbell")
    out = tmp_path / "gn.csv"
    assert main(["gn", str(state_dir), "--stop", "2", "--reference", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[1][:3] == ["1", "2", "3"]
    assert (tmp_path / "gn_reference.csv").exists()
    assert "identical=True" in capsys.readouterr().out
    assert EngineState.load(state_dir).graph.m == len(FIXTURES["barbell"][1])


def test_missing_state_is_usage_error(tmp_path):
    assert main(["verify", str(tmp_path / "nope")]) == EXIT_USAGE


def test_unknown_command():
    assert main(["frobnicate"]) == EXIT_USAGE


def test_verify_size_guard(tmp_path, monkeypatch):
    state_dir = init_state(tmp_path, "p4")
    monkeypatch.setattr(cli, "REFERENCE_MAX_VERTICES", 3)
    assert main(["verify", str(state_dir)]) == EXIT_USAGE


@pytest.mark.slow
def test_init_1k_store_size(tmp_path):
    g = small_world_graph(1000, seed=0)
    path = tmp_path / "g.txt"
    save_edge_list(g, path)
    state_dir = tmp_path / "state"
    assert main(["init", str(path), str(state_dir)]) == EXIT_OK
    assert (state_dir / "stores" / "part-000.sbc").stat().st_size == HEADER_SIZE + 1000 * 11 * 1000
    state = EngineState.load(state_dir)
    lines = []
    for u in range(0, 500, 5):
        v = u + 500
        if not state.graph.has_edge(u, v):
            lines.append(f"+ {state.labels[u]} {state.labels[v]}")
    (tmp_path / "stream.txt").write_text("\n".join(lines) + "\n")
    assert main(["apply", str(state_dir), str(tmp_path / "stream.txt")]) == EXIT_OK
    assert main(["verify", str(state_dir)]) == EXIT_OK


def test_empty_graph_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# nothing\n")
    assert main(["init", str(path), str(tmp_path / "state")]) == EXIT_USAGE


def test_scores_csv_identical_for_any_worker_count(tmp_path):
    g = small_world_graph(300, k=6, p=0.2, seed=3)
    graph_path = tmp_path / "sw.txt"
    save_edge_list(g, graph_path)
    rng = random.Random(3)
    removals = rng.sample(list(g.edges()), 10)
    additions = []
    while len(additions) < 10:
        u, v = sorted(rng.sample(range(g.n), 2))
        if not g.has_edge(u, v) and (u, v) not in additions:
            additions.append((u, v))
    stream = tmp_path / "stream.txt"
    stream.write_text("".join(f"- {u} {v}\n" for u, v in removals) + "".join(f"+ {u} {v}\n" for u, v in additions))
    outputs = []
    for workers in (1, 3, 4, 8):
        state_dir = tmp_path / f"state-{workers}"
        assert main(["init", str(graph_path), str(state_dir), "-p", str(workers)]) == EXIT_OK
        initial = (state_dir / "scores.csv").read_bytes()
        assert main(["apply", str(state_dir), str(stream)]) == EXIT_OK
        outputs.append((initial, (state_dir / "scores.csv").read_bytes()))
    assert all(out == outputs[0] for out in outputs[1:])


def layered_graph_lines(width=17):
    """s and t joined through four complete bipartite layers: width**4 shortest s–t paths."""
    layers = [[f"l{i}_{j}" for j in range(width)] for i in range(4)]
    lines = [f"s {v}" for v in layers[0]]
    lines += [f"t {v}" for v in layers[3]]
    for upper, lower in zip(layers, layers[1:]):
        lines += [f"{a} {b}" for a in upper for b in lower]
    return lines


def test_init_failure_leaves_no_stores(tmp_path):
    graph_path = tmp_path / "layered.txt"
    graph_path.write_text("\n".join(layered_graph_lines()) + "\n")
    state_dir = tmp_path / "state"
    assert main(["init", str(graph_path), str(state_dir), "-p", "2", "--sigma-width", "2"]) == EXIT_USAGE
    assert list((state_dir / "stores").glob("*")) == []
    assert not (state_dir / "manifest.txt").exists()
