import csv
import json

import numpy as np
import pytest

from conecal.cli import RunSpec, main, run
from conecal.conjugate import read_gridfn


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_quadratic(capsys):
    code, out, _ = run_cli(["verify", "--cone", "orthant:1", "--fn", "catalog:quad", "--radius", "2",
                            "--h", "0.02", "--levels", "3"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["verdict"]["identity_holds"] is True
    assert rep["grid"]["nodes"] == 101 and len(rep["level_digests"]) == 3
    assert rep["spec"]["cone"] == "orthant:1"


def test_verify_counterexample_exit_code(capsys):
    code, out, _ = run_cli(["verify", "--cone", "orthant:1", "--fn", "catalog:shifted-quad:1",
                            "--radius", "2", "--h", "0.02"], capsys)
    rep = json.loads(out)
    assert code == 2
    assert rep["verdict"]["worst_node"] == [0.0]
    assert rep["verdict"]["worst_gap"] == pytest.approx(1.0, abs=0.05)


def test_verify_csv_and_trend(tmp_path, capsys):
    trend = tmp_path / "trend.csv"
    code, out, _ = run_cli(["verify", "--cone", "orthant:1", "--fn", "catalog:quad", "--radius", "1",
                            "--h", "0.1", "--levels", "2", "--format", "csv",
                            "--trend-out", str(trend)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert [float(r["h"]) for r in rows] == [0.1, 0.05]
    assert list(csv.DictReader(trend.read_text().splitlines()))[1]["h"] == "0.05"


def test_bench(capsys):
    code, out, _ = run_cli(["bench", "--cone", "orthant:2", "--fn", "catalog:quad", "--radius", "1",
                            "--h", "1/63", "--repeat", "1"], capsys)
    assert code == 0
    row = next(csv.DictReader(out.splitlines()))
    assert row["shape"] == "64x64"
    assert float(row["max_abs_diff"]) <= 1e-12
    assert float(row["naive_s"]) > 0 and float(row["fast_s"]) > 0


def test_bench_needs_orthant(capsys):
    code, _, err = run_cli(["bench", "--cone", "psd:2", "--fn", "catalog:quad", "--radius", "1",
                            "--h", "0.5"], capsys)
    assert code == 1 and "orthant" in err


def test_conjugate_roundtrip(tmp_path, capsys):
    out = tmp_path / "fs.csv"
    code, _, _ = run_cli(["conjugate", "--cone", "lorentz:2", "--fn", "catalog:quad", "--radius", "1",
                          "--h", "0.5", "--out", str(out)], capsys)
    assert code == 0
    fs = read_gridfn(out)
    assert fs.grid.cone.spec == "lorentz:2" and fs.grid.radius == 2.0
    i = fs.grid.index_of([1.0, 0.0, 0.0])
    # |x|^2 on the unit-radius lattice: sup of x0 - |x|^2 is 0.25 at x0 = 0.5
    assert fs.values[i] == pytest.approx(0.25)
    code, out2, _ = run_cli(["verify", "--fn", str(out)], capsys)
    assert code == 0 and json.loads(out2)["grid"]["cone"] == "lorentz:2"


def test_project(tmp_path, capsys):
    pts = tmp_path / "p.csv"
    pts.write_text("0,2\n-1,0\n1,0.5\n")
    code, out, _ = run_cli(["project", "--cone", "lorentz:1", "--points", str(pts)], capsys)
    assert code == 0
    rows = np.array([[float(v) for v in line.split(",")] for line in out.splitlines()[1:]])
    np.testing.assert_allclose(rows, [[1, 1], [0, 0], [1, 0.5]], atol=1e-15)


def test_faces_single(capsys):
    code, out, _ = run_cli(["faces", "--face", "psd-block:3:2", "--samples", "200"], capsys)
    assert code == 0 and json.loads(out)["passed"] is True


def test_faces_audit(capsys):
    code, out, _ = run_cli(["faces", "--cone", "lorentz:2", "--samples", "100", "--rotations", "2"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["faces_audited"] == 4


def test_audit_cone(capsys):
    code, out, _ = run_cli(["audit-cone", "--cone", "psd:3", "--samples", "1000"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["report"]["violations"] == 0


@pytest.mark.parametrize("args,token", [
    (["verify", "--cone", "orthnt:1", "--fn", "catalog:quad", "--radius", "1", "--h", "0.1"], "orthnt:1"),
    (["verify", "--cone", "orthant:1", "--fn", "catalog:quadx", "--radius", "1", "--h", "0.1"], "quadx"),
    (["verify", "--cone", "orthant:1", "--fn", "catalog:quad", "--radius", "1", "--h", "zz"], "zz"),
    (["verify", "--cone", "orthant:1", "--fn", "catalog:quad", "--radius", "-1", "--h", "0.1"], "radius"),
    (["verify", "--cone", "orthant:1", "--fn", "nofile.csv", "--radius", "1", "--h", "0.1"], "nofile.csv"),
    (["faces", "--face", "psd-block:3:q"], "psd-block:3:q"),
    (["project", "--cone", "orthant:2", "--points", "missing.csv"], "missing.csv"),
    (["frobnicate"], "frobnicate"),
])
def test_spec_errors_exit_one(args, token, capsys):
    code = None
    try:
        code = main(args)
    except SystemExit as exc:
        code = exc.code
    _, err = capsys.readouterr()
    assert code == 1
    assert token in err


def test_node_budget_exit_one(capsys):
    code, _, err = run_cli(["verify", "--cone", "orthant:3", "--fn", "catalog:quad", "--radius", "1",
                            "--h", "0.001"], capsys)
    assert code == 1 and "budget" in err


def test_run_spec_validation():
    assert run(RunSpec("verify", cone="orthant:1", fn="catalog:quad", radius=1.0, spacing=0.1, levels=0)) == 1


@pytest.mark.parametrize("args", [
    ["verify", "--cone", "psd:2", "--fn", "catalog:trace", "--radius", "2", "--h", "0.5", "--levels", "2"],
    ["faces", "--cone", "psd:2", "--samples", "100", "--rotations", "2", "--seed", "3"],
    ["audit-cone", "--cone", "lorentz:3", "--samples", "500", "--seed", "9"],
])
def test_deterministic_reports(args, tmp_path, capsys):
    reps = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(args + ["--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        rep.pop("timings")
        reps.append(json.dumps(rep, sort_keys=True))
    assert reps[0] == reps[1]
