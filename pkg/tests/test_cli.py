import json
from pathlib import Path

import numpy as np
import pytest

from rcinterp.cli import main

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"
QUICK = {"conformal_N": 256, "modulus_samples": 2000}
GRID = ["--grid-radial", "48", "--grid-angular", "96"]


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def disk_problem(**extra):
    data = json.loads((PROBLEMS / "disk1.json").read_text())
    data["engine"] = dict(QUICK)
    data.update(extra)
    return data


@pytest.fixture(scope="module")
def disk_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    prob = write(tmp, "p.json", disk_problem())
    out = tmp / "r.json"
    code = main(["interpolate", "--problem", prob, "--out", str(out), *GRID])
    return code, out, prob


def test_interpolate_disk(disk_run):
    code, out, _ = disk_run
    rep = json.loads(out.read_text())["report"]
    assert code == 0 and rep["ok"] and rep["interior_margin"] > 0
    header = out.with_suffix(".grid.csv").read_text().splitlines()[0]
    assert header.startswith("x,y,gauge_h,abs_h1")


def test_byte_determinism(disk_run, tmp_path):
    _, out, prob = disk_run
    again = tmp_path / "again.json"
    assert main(["interpolate", "--problem", prob, "--out", str(again), *GRID, "--threads", "3"]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_verify_and_tamper(disk_run, tmp_path):
    _, out, _ = disk_run
    assert main(["verify", "--problem", str(out), "--out", str(tmp_path / "v.json")]) == 0
    data = json.loads(out.read_text())
    data["report"]["interior_margin"] = 0.99
    bad = write(tmp_path, "bad.json", data)
    assert main(["verify", "--problem", bad, "--out", str(tmp_path / "v2.json")]) == 2
    rep = json.loads((tmp_path / "v2.json").read_text())["report"]
    assert rep["mismatched_keys"] == ["interior_margin"] and rep["recomputed_ok"]


def test_audit_failure_exit_two(tmp_path):
    # an unshrunk horn map pokes outside the cusp: audit fails, report still written
    prob = write(tmp_path, "h0.json", {"profile": {"kind": "parabolic", "c": 0.39}, "N": 64,
                                       "shrink": 0, "audit_grid": 40})
    out = tmp_path / "h0_out.json"
    assert main(["conformal", "--problem", prob, "--out", str(out)]) == 2
    data = json.loads(out.read_text())
    assert data["report"]["ok"] is False and "insufficient shrink" in data["error"]


def test_user_tolerance_is_checked(tmp_path):
    prob = write(tmp_path, "p.json", disk_problem(tolerances={"interp": 1e-12}))
    out = tmp_path / "r.json"
    assert main(["interpolate", "--problem", prob, "--out", str(out), *GRID]) == 0
    assert json.loads(out.read_text())["report"]["checks"]["interp_user_tolerance"]


def test_gauge_table_equals_norms(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gauge", "--problem", str(PROBLEMS / "gauge_ball.json"), "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    rows = data["report"]["table"]
    assert len(rows) == 8
    for row in rows:
        v = np.array([complex(*c) for c in row["vector"]])
        assert row["gauge"] == pytest.approx(np.linalg.norm(v) / 2, rel=1e-12)


def test_lift_command(tmp_path):
    out = tmp_path / "l.json"
    assert main(["lift", "--problem", str(PROBLEMS / "lift2.json"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["interp_residual"] <= 1e-10 and rep["branch_offsets"] == [0, 1]


def test_conformal_command(tmp_path):
    prob = write(tmp_path, "h.json", {"profile": {"kind": "parabolic", "c": np.pi / 8}, "N": 256,
                                      "audit_grid": 40})
    out = tmp_path / "h_out.json"
    code = main(["conformal", "--problem", prob, "--out", str(out)])
    rep = json.loads(out.read_text())["report"]
    assert code == (0 if rep["ok"] else 2)
    rows = out.with_suffix(".boundary.csv").read_text().splitlines()
    assert rows[0] == "t,gamma_re,gamma_im,preimage_angle" and len(rows) > 100


@pytest.mark.parametrize("data,key", [
    ({"nodes": [0.0], "values": [1.0], "body": {"kind": "ball", "radius": 1, "dim": 1}, "bogus": 1},
     "bogus"),
    ({"nodes": [0.0], "values": [1.0]}, "body"),
    ({"nodes": [0.0], "values": [1.0], "body": {"kind": "ball", "radius": 1, "dim": 1},
      "grid": {"radial": 0}}, "grid.radial"),
    ({"nodes": [0.0], "values": [[0, 0]], "body": {"kind": "ball", "radius": 1, "dim": 1}}, "values"),
    ({"nodes": [0.0, 0.0], "values": [1, 1], "body": {"kind": "ball", "radius": 1, "dim": 1}}, "nodes"),
])
def test_input_errors_name_the_key(tmp_path, capsys, data, key):
    prob = write(tmp_path, "bad.json", data)
    out = tmp_path / "out.json"
    assert main(["interpolate", "--problem", prob, "--out", str(out)]) == 1
    assert f"invalid key '{key}'" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{\"nodes\": [0.0,")
    assert main(["gauge", "--problem", str(path), "--out", str(tmp_path / "o.json")]) == 1
    assert "invalid key" in capsys.readouterr().err
    assert main(["gauge", "--problem", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o.json")]) == 1
