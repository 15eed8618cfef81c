from __future__ import annotations

import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from coalflow.cli import TRAJECTORY_COLUMNS, RunConfig, main

SIM = ["simulate", "--profile", "uniform", "--levels", "8", "--t-end", "0.1", "--dt", "1e-5",
       "--replicates", "1", "--seed", "7"]


def run_cli(*args: str, threads: int | None = None, env_threads: int = 4):
    """The CLI in a fresh interpreter, so numba sees the requested thread pool."""
    env = dict(os.environ, NUMBA_NUM_THREADS=str(env_threads))
    cmd = [sys.executable, "-m", "coalflow", *args]
    if threads is not None:
        cmd += ["--threads", str(threads)]
    return subprocess.run(cmd, capture_output=True, text=True, env=env)


def test_simulate_smoke_and_schema(tmp_path):
    assert main(SIM + ["--out", str(tmp_path)]) == 0
    with open(tmp_path / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    t0 = [r for r in rows[1:] if float(r[1]) == 0.0]
    assert len(t0) == 256
    masses = {}
    for r in rows[1:]:
        masses[r[1]] = masses.get(r[1], 0.0) + float(r[4])
    assert all(abs(m - 1.0) < 1e-9 for m in masses.values())
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 7 and len(man["config_hash"]) == 64
    assert man["outputs"]["trajectory.csv"]


def test_simulate_twice_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SIM + ["--out", str(a)]) == 0
    assert main(SIM + ["--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_rerun_from_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SIM + ["--replicates", "2", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["config_hash"] == mb["config_hash"] and ma["outputs"] == mb["outputs"]


def test_missing_profile_file(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code = main(["simulate", "--profile", str(missing), "--out", str(tmp_path / "o")])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_profile_file_and_inline(tmp_path):
    prof = {"kind": "step", "total_mass": 1.0, "breakpoints": [0, .5, 1], "values": [0, .2]}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prof))
    assert main(["simulate", "--profile", str(path), "--t-end", "0.01", "--n-times", "2",
                 "--out", str(tmp_path / "f")]) == 0
    assert main(["simulate", "--profile", json.dumps(prof), "--t-end", "0.01", "--n-times", "2",
                 "--out", str(tmp_path / "i")]) == 0
    assert ((tmp_path / "f" / "trajectory.csv").read_bytes()
            == (tmp_path / "i" / "trajectory.csv").read_bytes())
    man = json.loads((tmp_path / "f" / "manifest.json").read_text())
    assert man["profile"]["kind"] == "step"


def test_usage_errors(tmp_path):
    out = str(tmp_path / "o")
    assert main(["estimate", "--replicates", "0", "--out", out]) == 2
    assert main(["estimate", "--observable", "bogus", "--out", out]) == 2
    assert main(["converge", "--profile", "quadratic", "--levels", "6", "--out", out]) == 2
    assert main(["verify", "--suite", "nope", "--out", out]) == 2
    assert main(["simulate", "--dt", "-1", "--out", out]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--no-such-flag"])
    assert exc.value.code == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(SIM + ["--out", str(blocker / "sub")]) == 2


def test_estimate_curve_and_fit(tmp_path):
    assert main(["estimate", "--profile", "uniform", "--levels", "8", "--grid", "geometric",
                 "--t-end", "0.01", "--n-times", "10", "--dt", "1e-5", "--observable",
                 "inverse_mass", "--u0", "0.5", "--fit", "--replicates", "400", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    with open(tmp_path / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["t"]) for r in rows])
    assert np.all(np.diff(t) > 0) and len(rows) == 10
    assert all(r["observable"] == "inverse_mass_at" for r in rows)
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert -0.5 < fit["slope"] < -0.2
    assert fit["range"][0] >= 20 * 1e-5


def test_estimate_batches(tmp_path):
    base = ["estimate", "--profile", "uniform", "--levels", "6", "--t-end", "0.001", "--n-times",
            "3", "--dt", "1e-5", "--observable", "inverse_mass", "--replicates", "300", "--seed", "2"]
    assert main(base + ["--out", str(tmp_path / "p")]) == 0
    assert main(base + ["--batches", "30", "--out", str(tmp_path / "b")]) == 0
    read = lambda d: list(csv.DictReader(open(tmp_path / d / "curves.csv")))
    p, b = read("p"), read("b")
    # same replicates, different merge grouping: equal up to rounding
    np.testing.assert_allclose([float(r["mean"]) for r in p], [float(r["mean"]) for r in b],
                               rtol=1e-12)
    assert all(float(r["se"]) > 0 for r in b)
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["config"]["batches"] == 30
    assert main(base + ["--batches", "1", "--out", str(tmp_path / "x")]) == 2


def test_converge_step_profile_zero_differences(tmp_path):
    prof = json.dumps({"kind": "step", "breakpoints": [0, .5, 1], "values": [0, 1]})
    assert main(["converge", "--profile", prof, "--levels", "3", "4", "5", "--t-end", "0.01",
                 "--dt", "1e-4", "--replicates", "200", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "convergence.json").read_text())
    for row in rep["rows"]:
        assert row["differences"] == [0.0, 0.0]
    assert "verdict: pass" in (tmp_path / "convergence.txt").read_text()


def test_verify_drift_fixture_fails(tmp_path):
    code = main(["verify", "--suite", "martingale", "--quick", "--inject-drift", "5",
                 "--out", str(tmp_path)])
    assert code == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    verdicts = {c["check"]: c["verdict"] for c in doc["checks"]}
    assert verdicts["martingale"] == "fail"


def test_config_hash_ignores_threads_and_out():
    a = RunConfig(threads=1, out="x")
    b = RunConfig(threads=8, out="y")
    assert a.config_hash() == b.config_hash()
    assert RunConfig(seed=1).config_hash() != a.config_hash()


@pytest.mark.parametrize("cmd", [
    SIM + ["--replicates", "3"],
    ["estimate", "--profile", "power", "--alpha", "2", "--levels", "7", "--grid", "geometric",
     "--t-end", "0.01", "--n-times", "6", "--dt", "1e-5", "--observable", "displacement",
     "--replicates", "3000", "--seed", "5"],
])
def test_outputs_independent_of_threads(tmp_path, cmd):
    outs = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        proc = run_cli(*cmd, "--out", str(out), threads=threads)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    name = "trajectory.csv" if cmd[0] == "simulate" else "curves.csv"
    assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
