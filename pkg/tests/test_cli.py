import json
import subprocess
import sys

import numpy as np
import pytest

from topocharge.cli import run
from topocharge.degree import gridmap_from_csv
from topocharge.geometry import config_from_json


@pytest.fixture
def files(tmp_path):
    pair = tmp_path / "pair.json"
    pair.write_text(json.dumps([{"pos": [0, 0], "deg": 1}, {"pos": [3, 0], "deg": -1}]))
    imb = tmp_path / "imbalanced.json"
    imb.write_text(json.dumps([{"pos": [0, 0], "deg": 1}, {"pos": [3, 0], "deg": 1}]))
    return tmp_path, pair, imb


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_transport_end_to_end(capsys, files):
    _, pair, _ = files
    code, out, err = call(capsys, "transport", "--in", pair)
    assert code == 0 and err == ""
    plan = json.loads(out)
    assert plan["cost"] == 3 and plan["edges"] == [{"i": 1, "j": 0, "flow": 1}]


def test_imbalanced_exit_2(capsys, files):
    _, _, imb = files
    code, out, err = call(capsys, "transport", "--in", imb)
    assert code == 2 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "TopologicalImbalance" and err.count("\n") == 1


@pytest.mark.parametrize("argv", [
    ["transport"],
    ["transport", "--in", "/nonexistent.json"],
    ["energy", "--in", "x.csv", "--p", "0.5"],
    ["branched", "--in", "x.json", "--alpha", "1.5"],
    ["sweep", "--alpha", "0.5", "--m", "9"],
    ["nosuchcommand"],
    [],
])
def test_validation_exit_1(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "ValidationError"


def test_selftest(capsys):
    code, out, _ = call(capsys, "selftest")
    assert code == 0 and json.loads(out)["passed"] is True


def test_dual_and_dualfield(capsys, files):
    tmp, pair, _ = files
    code, out, _ = call(capsys, "dual", "--in", pair)
    assert code == 0 and json.loads(out) == {"value": 3, "potential": [3, 0], "gap": 0}
    code, out, _ = call(capsys, "dualfield", "--in", pair, "--grid", 5)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "x,y,phi" and len(lines) == 26
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    # every sample obeys phi = min_i (f_i + |x - a_i|)
    want = np.minimum(3 + np.hypot(vals[:, 0], vals[:, 1]), np.hypot(vals[:, 0] - 3, vals[:, 1]))
    assert np.allclose(vals[:, 2], want, rtol=0, atol=1e-15)


def test_generate_degree_relaxed_pipeline(capsys, tmp_path):
    grid = tmp_path / "pair.csv"
    code, _, _ = call(capsys, "generate", "vortex_pair", "--grid", 128, "--out", grid)
    assert code == 0
    gm = gridmap_from_csv(grid.read_text())
    assert gm.nx == 128
    code, out, _ = call(capsys, "degree", "--in", grid)
    found = json.loads(out)
    assert [s["deg"] for s in found["singularities"]] == [1, -1] and found["boundary_degree"] == 0
    code, out, _ = call(capsys, "relaxed", "--in", grid)
    rep = json.loads(out)
    assert code == 0 and rep["transport"] == 1
    code, out, _ = call(capsys, "energy", "--in", grid, "--format", "csv")
    assert out.splitlines()[0] == "p,energy"
    assert float(out.splitlines()[1].split(",")[1]) == pytest.approx(rep["dirichlet"], rel=1e-15)


def test_generate_examples(capsys, tmp_path):
    code, out, _ = call(capsys, "generate", "dyadic_array", "--m", 2, "--n", 3)
    cfg = config_from_json(out)
    assert code == 0 and len(cfg) == 65 and sorted(cfg.degrees.tolist())[0] == -64
    target = tmp_path / "c.csv"
    call(capsys, "generate", "constant", "--grid", 16, "--out", target)
    code, out, _ = call(capsys, "energy", "--in", target)
    assert json.loads(out)["energy"] == 0
    target = tmp_path / "v.csv"
    call(capsys, "generate", "single_vortex", "--grid", 64, "--out", target)
    code, out, _ = call(capsys, "degree", "--in", target)
    assert [s["deg"] for s in json.loads(out)["singularities"]] == [1]


def test_branched_modes(capsys, tmp_path):
    cfg = tmp_path / "cluster.json"
    cfg.write_text(json.dumps([{"pos": [0, 0], "deg": 1}, {"pos": [0, 0.1], "deg": 1},
                               {"pos": [10, 0], "deg": -1}, {"pos": [10, 0.1], "deg": -1}]))
    code, out, _ = call(capsys, "branched", "--in", cfg, "--alpha", "1/2")
    tree = json.loads(out)
    assert code == 0 and max(e["flow"] for e in tree["edges"]) == 2 and tree["alpha"] == "1/2"
    code, out, _ = call(capsys, "branched", "--mode", "sweep", "--alpha", "3/4", "--m", 4, "--n", 3)
    lines = out.strip().splitlines()
    assert lines[0] == "n,centralized,hierarchical_recurrence,hierarchical_closed,regime"
    assert len(lines) == 5 and all(ln.endswith(",critical") for ln in lines[1:])
    code2, out2, _ = call(capsys, "sweep", "--alpha", "3/4", "--m", 4, "--n", 3)
    assert out2 == out


def test_json_csv_round_trip_and_determinism(capsys, files):
    tmp, pair, _ = files
    outs = [call(capsys, "transport", "--in", pair, "--format", fmt)[1]
            for fmt in ("json", "csv", "json", "csv")]
    assert outs[0] == outs[2] and outs[1] == outs[3]
    assert outs[1] == "i,j,flow\n1,0,1\n"
    cfg_text = call(capsys, "generate", "dyadic_array", "--m", 1, "--n", 2, "--h", 0.1)[1]
    cfg = config_from_json(cfg_text)
    (tmp / "d.json").write_text(cfg_text)
    again = call(capsys, "generate", "dyadic_array", "--m", 1, "--n", 2, "--h", 0.1)[1]
    assert again == cfg_text
    # 17 significant digits: every float re-parses bitwise
    assert [c.position.coords for c in config_from_json(cfg_text).charges] == \
        [c.position.coords for c in cfg.charges]


def test_generated_map_matches_fixture(capsys):
    from topocharge.fixtures import vortex_square

    code, out, _ = call(capsys, "generate", "vortex_square", "--grid", 32, "--eps", 0.1)
    gm, ref = gridmap_from_csv(out), vortex_square(n=32, eps=0.1)
    assert code == 0 and np.array_equal(gm.values, ref.values) and np.array_equal(gm.mask, ref.mask)


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "topocharge.cli", "selftest"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0, res.stderr
