import csv
import io
import json
import shutil
import subprocess

import pytest

from sparse_weight_lab.cli import main
from sparse_weight_lab.singular import RATIO_COLUMNS


@pytest.fixture()
def tree_file(tmp_path):
    out = tmp_path / "w.json"
    assert main(["build", "-d", "1", "-N", "3", "-K", "2", "--kernel", "hilbert", "-o", str(out)]) == 0
    return out


def test_build_then_verify(tree_file, tmp_path, capsys):
    doc = json.loads(tree_file.read_text())
    assert doc["header"]["format"] == "swl-tree" and doc["header"]["version"] == 1
    rep = tmp_path / "v.json"
    assert main(["verify", str(tree_file), "--report", str(rep)]) == 0
    checks = [c["check"] for c in json.loads(rep.read_text())["checks"]]
    assert checks[:3] == ["structure", "total-mass", "A-uniformity"]
    assert checks[-2:] == ["separation", "sign-matching"]


def test_verify_corrupted_names_invariant(tree_file, tmp_path, capsys):
    doc = json.loads(tree_file.read_text())
    doc["alpha"][1] = ["730", "100"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", str(bad)]) == 1
    assert "alpha_1" in capsys.readouterr().err


def test_verify_detects_moved_child(tree_file, tmp_path, capsys):
    doc = json.loads(tree_file.read_text())
    g = doc["generations"][1]["coords"]
    g[1] = g[0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", str(bad)]) == 1


def test_cones(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert main(["cones", "--kernel", "riesz:d=2,j=1", "-N", "2", "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["z_plus"] == pytest.approx([2**-0.5, 2**-0.5]) and doc["A"] == 9
    assert main(["cones", "--kernel", "hilbert"]) == 0
    assert "z+ = [1.0]" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert main(["cones", "--kernel", "const"]) == 2
    assert main(["cones", "--kernel", "nonsense"]) == 2
    assert main(["build", "-d", "2", "-N", "5", "-K", "3", "--kernel", "riesz:d=2,j=1", "-o", str(tmp_path / "x")]) == 3
    assert main(["build", "-d", "2", "-N", "3", "--kernel", "hilbert", "-o", str(tmp_path / "x")]) == 2
    assert main(["verify", str(tmp_path / "missing.json")]) == 2
    assert main(["nosuchcommand"]) == 2


def test_plot_d3_is_config_error(tmp_path):
    t = tmp_path / "t3.json"
    assert main(["build", "-d", "3", "-N", "2", "-K", "0", "--kernel", "riesz:d=3,j=1", "-o", str(t)]) == 0
    assert main(["plot", str(t), "-o", str(tmp_path / "p.svg")]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 3, "K": 1, "output": str(tmp_path / "a.json")}))
    assert main(["build", "--config", str(cfg)]) == 0
    assert json.loads((tmp_path / "a.json").read_text())["header"]["K"] == 1
    # explicit flags win over the config
    assert main(["build", "--config", str(cfg), "-K", "2"]) == 0
    assert json.loads((tmp_path / "a.json").read_text())["header"]["K"] == 2
    cfg.write_text(json.dumps({"N": 3, "bogus": 1}))
    assert main(["build", "--config", str(cfg), "-o", str(tmp_path / "b.json")]) == 2
    cfg.write_text(json.dumps({"N": "three"}))
    assert main(["build", "--config", str(cfg), "-o", str(tmp_path / "b.json")]) == 2
    cfg.write_text(json.dumps({"truncation": "sometimes", "N": 3}))
    assert main(["build", "--config", str(cfg), "-o", str(tmp_path / "b.json")]) == 2
    cfg.write_text("[1, 2]")
    assert main(["build", "--config", str(cfg), "-o", str(tmp_path / "b.json")]) == 2


def test_threads_env(tmp_path, monkeypatch, tree_file):
    monkeypatch.setenv("SWL_THREADS", "x")
    assert main(["operator", str(tree_file)]) == 2
    monkeypatch.setenv("SWL_THREADS", "2")
    assert main(["operator", str(tree_file), "--node-limit", "2"]) == 0


def test_operator_csv_schema_and_determinism(tree_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    s = tmp_path / "s.json"
    assert main(["operator", str(tree_file), "--ratios", str(a), "--summary", str(s), "--node-limit", "4"]) == 0
    assert main(["operator", str(tree_file), "--ratios", str(b), "--node-limit", "4", "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text(), newline="")))
    assert rows[0][: len(RATIO_COLUMNS)] == RATIO_COLUMNS
    assert all(len(r) == len(rows[0]) for r in rows)
    svg = tmp_path / "s.svg"
    assert main(["plot", str(s), "-o", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 3


def test_maximal_command(tree_file, tmp_path):
    out = tmp_path / "m.csv"
    assert main(["maximal", str(tree_file), "--points", "100", "--seed", "1", "-o", str(out)]) == 0
    assert len(out.read_bytes().strip().split(b"\r\n")) == 101


def test_harness_commands(tmp_path):
    for cmd in (["thm1"], ["thm2"], ["thm3"], ["thm4", "--span", "6", "--samples", "3"]):
        rep = tmp_path / f"{cmd[0]}.json"
        csvf = tmp_path / f"{cmd[0]}.csv"
        assert main(cmd + ["--N0", "3", "--N-max", "4", "--report", str(rep), "-o", str(csvf)]) == 0
        doc = json.loads(rep.read_text())
        assert len(doc["rows"]) == 2 and "flags" in doc
        assert csvf.read_text().startswith("N,")
        assert main(["plot", str(rep), "-o", str(tmp_path / f"{cmd[0]}.svg")]) == 0


def test_rh_command(tmp_path):
    rep = tmp_path / "rh.json"
    assert main(["rh", "-N", "3", "--eps", "1", "--terms", "40", "--report", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["rho_float"] == pytest.approx(2.43) and doc["first_above_1e6"] <= 40


def test_console_script(tmp_path):
    exe = shutil.which("sparse-weight-lab")
    if exe is None:
        pytest.skip("console script not installed")
    r = subprocess.run([exe, "cones", "--kernel", "const"], capture_output=True, text=True)
    assert r.returncode == 2
