import json
import subprocess
import sys

import numpy as np
import pytest

from gfcn.cli import EXIT_INPUT, EXIT_MODEL, EXIT_OK, EXIT_PRECONDITION, EXIT_TARGET, main
from gfcn.flows import FlowCover, save_cover
from gfcn.graph import format_edge_list, path_graph, save_graph, star_graph
from gfcn.spread import load_dataset

from helpers import random_bounded_graph, random_tree


@pytest.fixture
def files(tmp_path):
    tree = random_tree(30, 5, np.random.default_rng(0))
    graph = random_bounded_graph(40, 5, 90, np.random.default_rng(1))
    paths = {"tree": tmp_path / "tree.txt", "graph": tmp_path / "graph.txt", "p3": tmp_path / "p3.txt"}
    save_graph(tree, str(paths["tree"]))
    save_graph(graph, str(paths["graph"]))
    paths["p3"].write_text(format_edge_list(path_graph(3)))
    return {k: str(v) for k, v in paths.items()}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_decompose_tree(capsys, files, tmp_path):
    out_file = tmp_path / "f.json"
    code, out, _ = run(capsys, "decompose", "--graph", files["tree"], "--strategy", "tree-exact", "--out", out_file)
    stats = json.loads(out)
    assert code == EXIT_OK
    assert stats["flows"] == (stats["d_max"] + 1) // 2
    assert stats["epsilon"] == 1.0
    assert out_file.exists() and (tmp_path / "f.json.config.json").exists()
    code, out, _ = run(capsys, "validate", "--graph", files["tree"], "--flows", out_file, "--epsilon", 1)
    assert code == EXIT_OK
    assert json.loads(out)["violations"] == []


def test_decompose_target_unmet(capsys, files):
    code, out, _ = run(capsys, "decompose", "--graph", files["graph"], "--max-len", 1, "--epsilon", 1.0)
    # every path is a single vertex, so no edge is covered
    assert code == EXIT_TARGET
    assert json.loads(out)["epsilon"] == 0.0


def test_decompose_lattice(capsys):
    code, out, _ = run(capsys, "decompose", "--strategy", "lattice", "--lattice", 4, 5)
    assert code == EXIT_OK
    assert json.loads(out)["flows"] == 2


def test_missing_graph_file(capsys, tmp_path):
    code, _, err = run(capsys, "decompose", "--graph", tmp_path / "nope.txt")
    assert code == EXIT_INPUT
    assert "nope.txt" in err


def test_malformed_graph(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 1\n")
    code, _, err = run(capsys, "decompose", "--graph", bad)
    assert code == EXIT_INPUT
    assert "self-loop" in err


def test_validate_reports_violations(capsys, files, tmp_path):
    g = path_graph(3)
    flows = tmp_path / "bad.json"
    save_cover(FlowCover.build(g, [[[0, 1], [1, 2]]]), str(flows))
    code, out, _ = run(capsys, "validate", "--graph", files["p3"], "--flows", flows)
    assert code == EXIT_PRECONDITION
    assert json.loads(out)["violations"]


def test_jordan_path_example(capsys, files):
    code, out, _ = run(capsys, "jordan", "--graph", files["p3"], "--infected", 0, 1, 2)
    assert code == EXIT_OK
    assert json.loads(out) == {"center": 1, "centers": [1]}


def test_jordan_needs_input(capsys, files):
    code, _, _ = run(capsys, "jordan", "--graph", files["p3"])
    assert code == EXIT_INPUT


def test_equiv_passes_on_tree(capsys, files):
    code, out, _ = run(capsys, "equiv-check", "--graph", files["tree"], "--poly", "1,-1,0.5")
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == EXIT_OK
    assert [r["op"] for r in rows] == ["A", "Atilde", "L", "Ltilde"]
    assert all(r["pass"] and r["max_deviation"] < 1e-9 for r in rows)


def test_equiv_repeated_edge_is_precondition_error(capsys, files, tmp_path):
    g = path_graph(3)
    flows = tmp_path / "rep.json"
    save_cover(FlowCover.build(g, [[[0, 1, 2]], [[0, 1]]]), str(flows))
    code, _, err = run(capsys, "equiv-check", "--graph", files["p3"], "--poly", "0,1", "--flows", flows)
    assert code == EXIT_PRECONDITION
    assert "(0, 1)" in err


def test_equiv_bad_polynomial(capsys, files):
    code, _, _ = run(capsys, "equiv-check", "--graph", files["p3"], "--poly", "abc")
    assert code == EXIT_INPUT


def test_simulate_and_jordan_dataset(capsys, files, tmp_path):
    data = tmp_path / "snap.jsonl"
    code, out, _ = run(capsys, "simulate", "--graph", files["graph"], "--samples", 12, "--out", data, "--seed", 4)
    assert code == EXIT_OK
    assert json.loads(out)["samples"] == 12
    assert len(load_dataset(str(data))) == 12
    code, out, _ = run(capsys, "jordan", "--graph", files["graph"], "--data", data, "--top", 10, 100)
    assert code == EXIT_OK
    assert json.loads(out)["top100%"] == 1.0


def test_train_and_eval_source(capsys, files, tmp_path):
    data = tmp_path / "snap.jsonl"
    run(capsys, "simulate", "--graph", files["graph"], "--samples", 30, "--out", data)
    run_dir = tmp_path / "run"
    code, _, _ = run(
        capsys, "train", "--graph", files["graph"], "--data", data, "--epochs", 2, "--channels", 4,
        "--out", run_dir, "--quiet",
    )
    assert code == EXIT_OK
    for name in ("checkpoint.json", "model.json", "history.jsonl", "config.json"):
        assert (run_dir / name).exists()
    code, out, _ = run(
        capsys, "eval", "--graph", files["graph"], "--data", data, "--channels", 4, "--run", run_dir
    )
    assert code == EXIT_OK
    metrics = json.loads(out)
    assert metrics["samples"] == 30 and 0.0 <= metrics["top10%"] <= 1.0


def test_train_bad_model_file(capsys, files, tmp_path):
    data = tmp_path / "snap.jsonl"
    run(capsys, "simulate", "--graph", files["graph"], "--samples", 3, "--out", data)
    model = tmp_path / "model.json"
    model.write_text(json.dumps({"layers": [{"type": "dense", "out": 2}], "skips": []}))
    code, _, err = run(
        capsys, "train", "--graph", files["graph"], "--data", data, "--model", model, "--out", tmp_path / "r"
    )
    assert code == EXIT_MODEL
    assert "flatten or readout" in err


def test_config_defaults_and_unknown_keys(capsys, files, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"strategy": "tree-exact"}))
    code, out, _ = run(capsys, "--config", cfg, "decompose", "--graph", files["tree"])
    assert code == EXIT_OK
    assert json.loads(out)["strategy"] == "tree-exact"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "--config", cfg, "decompose", "--graph", files["tree"])
    assert code == EXIT_INPUT
    assert "bogus" in err


def test_product(capsys, files, tmp_path):
    out_file = tmp_path / "grid.txt"
    code, out, _ = run(capsys, "product", "--g1", files["p3"], "--g2", files["p3"], "--out", out_file)
    assert code == EXIT_OK
    assert json.loads(out) == {"num_edges": 12, "num_vertices": 9}


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "gfcn", "jordan", "--graph", files["p3"], "--infected", "0"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["center"] == 0


def test_star_decompose_stdout_is_json(capsys, tmp_path):
    g = tmp_path / "star.txt"
    g.write_text(format_edge_list(star_graph(5)))
    code, out, _ = run(capsys, "decompose", "--graph", g, "--strategy", "tree-exact")
    assert code == EXIT_OK
    assert json.loads(out)["flows"] == 3


def test_recorded_config_replays_run(capsys, files, tmp_path):
    data = tmp_path / "snap.jsonl"
    run(capsys, "simulate", "--graph", files["graph"], "--samples", 5, "--out", data, "--seed", 11)
    first = data.read_bytes()
    data.unlink()
    code, _, _ = run(capsys, "--config", str(data) + ".config.json", "simulate")
    assert code == EXIT_OK
    assert data.read_bytes() == first
