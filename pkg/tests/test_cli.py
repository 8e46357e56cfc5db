import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from heavytail_ccp.cli import (EXIT_ERROR, EXIT_OK, SOLUTION_FILE, TRAJECTORY_FILE, fmt, main,
                               perturbed_positions)
from heavytail_ccp.scenario import load_scenario

from conftest import shipped


def _doc(name):
    return json.loads(shipped(name).read_text())


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    out = tmp_path_factory.mktemp("obs")
    code = main(["plan", "observational", "-o", str(out)])
    return code, out


def test_plan_writes_solution_and_trajectory(planned):
    code, out = planned
    assert code == EXIT_OK
    sol = json.loads((out / SOLUTION_FILE).read_text())
    assert sol["converged"] and sol["horizon"] == 8
    U = np.array(sol["controllers"]["deputy"])
    assert U.shape == (8, 3)
    with open(out / TRAJECTORY_FILE) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    assert [int(r["k"]) for r in rows] == list(range(1, 9))
    assert all(r["vehicle"] == "deputy" for r in rows)


def test_plan_is_byte_identical(planned, tmp_path):
    _, out = planned
    assert main(["plan", "observational", "-o", str(tmp_path)]) == EXIT_OK
    for name in (SOLUTION_FILE, TRAJECTORY_FILE):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_plan_rejects_threshold_below_floor(tmp_path, capsys):
    doc = _doc("observational")
    doc["thresholds"]["alpha_o"] = 0.8
    assert main(["plan", _write(tmp_path / "s.json", doc), "-o", str(tmp_path)]) == EXIT_ERROR
    assert "thresholds.alpha_o" in capsys.readouterr().err
    assert not (tmp_path / SOLUTION_FILE).exists()


def test_plan_without_constraints_gives_zero_controller(tmp_path):
    doc = _doc("observational")
    doc["targets"] = []
    doc["collisions"] = []
    assert main(["plan", _write(tmp_path / "s.json", doc), "-o", str(tmp_path)]) == EXIT_OK
    sol = json.loads((tmp_path / SOLUTION_FILE).read_text())
    assert np.array_equal(sol["controllers"]["deputy"], np.zeros((8, 3)))
    assert sol["cost"] == 0.0


def test_validate_solution(planned, tmp_path):
    _, out = planned
    report = tmp_path / "rep.json"
    code = main(["validate", "observational", str(out / SOLUTION_FILE), "--samples", "2000",
                 "--report", str(report)])
    rep = json.loads(report.read_text())
    assert code == (EXIT_OK if rep["passed"] else EXIT_ERROR)
    assert rep["samples"] == 2000
    assert set(rep["families"]) == {"alpha_T", "alpha_o"}


def test_validate_rejects_mismatched_solution(planned, tmp_path, capsys):
    _, out = planned
    sol = json.loads((out / SOLUTION_FILE).read_text())
    sol["controllers"] = {"other": sol["controllers"]["deputy"]}
    bad = _write(tmp_path / "sol.json", sol)
    assert main(["validate", "observational", bad, "--samples", "10"]) == EXIT_ERROR
    assert "controllers" in capsys.readouterr().err


def test_unknown_scenario(capsys):
    assert main(["plan", "no-such-scenario", "-o", "."]) == EXIT_ERROR


def test_quantile_dump(tmp_path):
    out = tmp_path / "q.csv"
    seg = tmp_path / "seg.csv"
    code = main(["quantile", "--dist", "t:2", "--h", "1e-4", "--p-end", "0.999",
                 "-o", str(out), "--segments", str(seg)])
    assert code == EXIT_OK
    data = np.genfromtxt(out, delimiter=",", names=True)
    p = data["p"]
    exact = (2 * p - 1) / np.sqrt(2 * p * (1 - p))
    assert np.max(np.abs(data["table"] - exact) / np.maximum(exact, 1e-3)) < 1e-5
    # values are printed with 12 significant digits
    assert np.all(data["pwa"] - data["table"] >= -1e-10)
    assert np.all(data["pwa"] - data["table"] <= 0.01)
    segs = np.atleast_2d(np.genfromtxt(seg, delimiter=",", skip_header=1))
    assert np.all(np.diff(segs[:, 0]) > 0)
    assert main(["quantile", "--dist", "weibull:2", "-o", str(out)]) == EXIT_ERROR


def test_batch_small(tmp_path):
    out = tmp_path / "b.json"
    assert main(["batch", "debris3", "--runs", "2", "--samples", "200", "-o", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    s = doc["summary"]
    assert s["runs"] == 2 and s["failures"] == 0
    assert set(s["satisfaction_min"]) == {"alpha_T", "alpha_r"}
    out2 = tmp_path / "b2.json"
    assert main(["batch", "debris3", "--runs", "2", "--samples", "200", "--workers", "2",
                 "-o", str(out2)]) == EXIT_OK
    doc2 = json.loads(out2.read_text())
    for a, b in zip(doc["runs"], doc2["runs"]):
        assert a["cost"] == b["cost"] and a["satisfaction"] == b["satisfaction"]


def test_perturbation_moves_positions_only():
    scn = load_scenario(shipped("debris3"))
    a = perturbed_positions(scn, 0, 0)
    b = perturbed_positions(scn, 1, 0)
    for v, x in zip(scn.vehicles, a):
        assert np.array_equal(x[3:], v.x0[3:])
        assert not np.array_equal(x[:3], v.x0[:3])
    assert not np.allclose(a[0], b[0])
    assert np.array_equal(a[0], perturbed_positions(scn, 0, 0)[0])


def test_fmt_rounds_to_twelve_digits():
    assert fmt(0.1 + 0.2) == "0.3"


def test_module_entry_point(tmp_path):
    out = tmp_path / "q.csv"
    proc = subprocess.run([sys.executable, "-m", "heavytail_ccp", "quantile", "--dist", "cauchy",
                           "--h", "1e-3", "--p-end", "0.99", "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
