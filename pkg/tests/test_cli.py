import json
import subprocess
import sys

import pytest

from tars.cli import main


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--seed", "2", "--flows-per-pair", "1", "--k-paths", "3", "-o", str(path)]) == 0
    return path


def test_gen_solve_tafs_validate(tmp_path, inst_file, capsys):
    sol = tmp_path / "exact.json"
    assert main(["solve", str(inst_file), "--mu", "3", "-o", str(sol)]) == 0
    data = json.loads(sol.read_text())
    assert data["format"] == "tars-solution" and data["version"] == 1
    assert data["status"] == "Optimal" and len(data["open_tas"]) <= 3
    assert main(["validate", str(inst_file), "--solution", str(sol), "--mu", "3"]) == 0
    # the solution belongs to the mu=3 variant of the instance
    assert main(["validate", str(inst_file), "--solution", str(sol)]) == 2

    heur = tmp_path / "tafs.json"
    assert main(["tafs", str(inst_file), "--mu", "3", "--scenario", "qos", "-o", str(heur)]) == 0
    assert json.loads(heur.read_text())["solver"] == "tafs2"
    assert main(["validate", str(inst_file), "--solution", str(heur), "--mu", "3", "--scenario", "qos"]) == 0
    out = capsys.readouterr().out
    assert "avg EPDD" in out and "OK" in out


def test_export_lp(tmp_path, inst_file):
    lp = tmp_path / "m.lp"
    assert main(["export-lp", str(inst_file), "--mu", "2", "-o", str(lp)]) == 0
    text = lp.read_text()
    assert text.splitlines()[1] == "Minimize" and text.rstrip().endswith("End")


def test_infeasible_exit_code(tmp_path, capsys):
    topo = tmp_path / "tiny.topo"
    topo.write_text("node 0 a capacity=10 cost=1e-4\nnode 1 b capacity=10 cost=1e-4\nlink 0 1 0.5 2.0 0.01\n")
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"bw_range": [1.0, 1.0]}))
    inst = tmp_path / "i.json"
    assert main(["gen", "--topology", str(topo), "--config", str(cfg), "-o", str(inst)]) == 0
    assert main(["solve", str(inst)]) == 2
    assert "Infeasible" in capsys.readouterr().out


def test_validate_topology(tmp_path):
    good = tmp_path / "g.topo"
    good.write_text("node 0 a\nnode 1 b\nlink 0 1 10 1 0\n")
    bad = tmp_path / "b.topo"
    bad.write_text("node 0 a\nnode 1 b\nnode 2 c\nlink 0 1 10 1 0\n")
    assert main(["validate", str(good)]) == 0
    assert main(["validate", str(bad)]) == 2


def test_errors_exit_1(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == 1
    broken = tmp_path / "x.json"
    broken.write_text("{not json")
    assert main(["solve", str(broken)]) == 1
    assert "error" in capsys.readouterr().err


def test_bench_cli(tmp_path, capsys):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"generator": {"flows_per_pair": 1, "k_paths": 2}, "mu_sweep": [0, 3]}))
    out = tmp_path / "out"
    rc = main(["bench", "--config", str(cfg), "--output-dir", str(out), "--seeds", "2", "--no-plots"])
    assert rc == 0
    assert (out / "runs.csv").exists() and (out / "report.txt").exists()
    assert "tars bench report" in capsys.readouterr().out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "tars.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "tars" in r.stdout
