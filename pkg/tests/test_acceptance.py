"""Acceptance criteria 1-11 at full size.

Each test prints one ``criterion k: PASS|FAIL`` line with the key numbers;
the lines are also collected into the pytest terminal summary.  Runs
standalone too: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from coalflow import verify as V
from coalflow.engine import geometric_grid
from coalflow.profiles import StepProfile, TabulatedProfile, to_step_profile

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

SEED = 1
UNIF = TabulatedProfile.uniform()
SINGLE = StepProfile.from_masses([1.0], [0.0])
EXP_GRID = geometric_grid(1e-2, 0.7, 13)   # 1.4e-4 .. 1e-2


def record(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@lru_cache(maxsize=None)
def uniform_exponent_run():
    return V.exponent_run(UNIF, 0.5, EXP_GRID, 10_000, SEED, dt=1e-6, level=10)


def test_criterion_01_two_particle_oracle():
    rep = V.check_two_particle(V.TwoParticleSpec(0.5, 0.5, 0.1), t=0.01, replicates=100_000,
                               seed=SEED, dt=1e-6, tol=0.01)
    rows = {r["statistic"]: r for r in rep.rows}
    p, m = rows["probability"], rows["mean_mass"]
    ok = abs(p["estimate"] - 0.61708) <= 0.01 and abs(m["estimate"] - 0.80854) <= 0.01
    record(1, ok, f"P={p['estimate']:.5f} (0.61708±0.01)  Em={m['estimate']:.5f} (0.80854±0.01)  "
                  f"N=1e5 dt=1e-6")


def test_criterion_02_invariant_fuzz():
    rep = V.fuzz_invariants(total_steps=1_000_000, d=256, seed=SEED)
    ok = rep.verdict == V.PASS and rep.observed["steps"] >= 1_000_000
    record(2, ok, f"steps={rep.observed['steps']} runs={rep.observed['runs']} "
                  f"failures={rep.observed['failures']}  d=256")


def test_criterion_03_small_mass_bound():
    us = [0.3, 0.5, 0.7]
    rs = [0.02, 0.05, 0.1, 0.2]
    ts = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    triples = [(us[i % 3], rs[i % 4], ts[i // 4]) for i in range(20)]
    assert len({tr for tr in triples}) == 20
    rep = V.check_mass_bound(UNIF, triples, replicates=100_000, seed=SEED, dt=5e-6, level=10)
    n_ok = sum(r["cp_upper"] <= r["bound"] for r in rep.rows)
    # control: the pieces covering [0.4, 0.6) share one starting point
    base = to_step_profile(UNIF, 10)
    vals = np.asarray(base.values).copy()
    left = base.breakpoints[:-1]
    flat = (left >= 0.4 - 1e-12) & (left < 0.6 - 1e-12)
    vals[flat] = vals[flat].mean()
    control = V.check_mass_bound(StepProfile.from_masses(base.masses, vals), [(0.45, 0.1, 1e-2)],
                                 replicates=100_000, seed=SEED, dt=5e-6)
    c = control.rows[0]
    ok = n_ok == 20 and c["G"] == 0 and c["count"] == 0
    worst = rep.observed["max_cp_upper_minus_bound"]
    record(3, ok, f"{n_ok}/20 triples with CP99 upper <= bound (worst upper-bound={worst:.3f}); "
                  f"flat control count={c['count']}")


def test_criterion_04_mass_exponent_alpha1():
    rep = V.check_mass_exponent(UNIF, 0.5, dt=1e-6, run=uniform_exponent_run())
    sm, si = rep.observed["slope_mass"], rep.observed["slope_inverse_mass"]
    ok = abs(sm - 1 / 3) <= 0.06 and abs(si + 1 / 3) <= 0.06
    record(4, ok, f"slope m={sm:.4f}±{rep.observed['stderr_mass']:.4f} (1/3±0.06)  "
                  f"slope 1/m={si:.4f}±{rep.observed['stderr_inverse_mass']:.4f} (-1/3±0.06)")


def test_criterion_05_mass_exponent_alpha2():
    rep = V.check_mass_exponent(TabulatedProfile.power(2.0, 0.5), 0.5, EXP_GRID, 10_000, SEED,
                                dt=1e-6, level=10)
    sm = rep.observed["slope_mass"]
    ok = abs(sm - 0.2) <= 0.06
    record(5, ok, f"slope m={sm:.4f}±{rep.observed['stderr_mass']:.4f} (1/5±0.06)  "
                  f"slope 1/m={rep.observed['slope_inverse_mass']:.4f}")


def test_criterion_06_displacement_exponent():
    rep = V.check_displacement_exponent(UNIF, 0.5, dt=1e-6, run=uniform_exponent_run())
    ctl = V.check_displacement_exponent(SINGLE, 0.5, EXP_GRID, 10_000, SEED, dt=1e-6, tol=0.02)
    s, c = rep.observed["slope_displacement"], ctl.observed["slope_displacement"]
    ok = abs(s - 1 / 3) <= 0.06 and abs(c - 0.5) <= 0.02
    record(6, ok, f"slope |X-g|={s:.4f} (1/3±0.06)  single-cluster control={c:.4f} (1/2±0.02)")


def test_criterion_07_qv_identity():
    tp = V.check_qv_two_particle(V.TwoParticleSpec(), np.geomspace(1e-4, 1e-2, 8), 10_000, SEED,
                                 dt=1e-6)
    un = V.check_qv_identity(UNIF, 0.5, np.geomspace(1e-4, 1e-2, 8), 10_000, SEED, dt=1e-6,
                             level=6)
    n_tp = sum(r["verdict"] == V.PASS for r in tp.rows)
    n_un = sum(r["verdict"] == V.PASS for r in un.rows)
    ok = n_tp == 8 and n_un == len(un.rows) == 8
    record(7, ok, f"two-particle closed form {n_tp}/8 overlap (max rel diff "
                  f"{tp.observed['max_rel_diff']:.3f}); uniform {n_un}/8 overlap "
                  f"(max |z|={un.observed['max_abs_z']:.2f})")


def test_criterion_08_center_of_mass():
    rep = V.check_center_of_mass(UNIF, t=0.1, replicates=10_000, seed=SEED, dt=1e-4, level=6)
    lo, hi = rep.ci["variance"]
    ok = lo <= 0.1 <= hi
    record(8, ok, f"Var={rep.observed['variance']:.5f} 95% CI [{lo:.5f}, {hi:.5f}] vs t/b=0.1")


def test_criterion_09_rescaling():
    rep = V.check_rescaling(alpha=1.0, rho=0.5, u=0.05, times=(1e-4, 3e-4, 1e-3),
                            replicates=10_000, seed=SEED)
    var_rows = [r for r in rep.rows if r["statistic"] == "displacement_variance"]
    n_var = sum(r["verdict"] == V.PASS for r in var_rows)
    exact = rep.observed["mass_identity_exact"]
    ok = exact and n_var == len(var_rows) == 3 and rep.verdict == V.PASS
    record(9, ok, f"mass identity exact={exact}; displacement variance {n_var}/3 overlap; "
                  f"verdict={rep.verdict}")


def test_criterion_10_dyadic_convergence():
    g = TabulatedProfile.from_function(lambda u: u * u)
    rep = V.check_dyadic_convergence(g, range(6, 11), t=0.01, u0=0.5, replicates=10_000,
                                     seed=SEED, dt=1e-5)
    rows = {r["statistic"]: r for r in rep.rows}
    ok = all(not any(rows[k]["difference_grows"]) and rows[k]["last_two_overlap"]
             for k in ("mass", "variance"))
    d = rows["mass"]["differences"]
    record(10, ok, "Em differences " + " ".join(f"{x:.2g}" for x in d)
           + "; VarX differences " + " ".join(f"{x:.2g}" for x in rows["variance"]["differences"]))


def _cli(args, threads, out):
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    cmd = [sys.executable, "-m", "coalflow", *args, "--threads", str(threads), "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr


def test_criterion_11_determinism():
    runs = {
        "simulate": ["simulate", "--profile", "uniform", "--levels", "8", "--t-end", "0.1",
                     "--dt", "1e-5", "--replicates", "2", "--seed", "7"],
        "estimate": ["estimate", "--profile", "uniform", "--levels", "8", "--grid", "geometric",
                     "--t-end", "0.01", "--n-times", "8", "--dt", "1e-5", "--observable", "mass",
                     "--u0", "0.5", "--fit", "--replicates", "5000", "--seed", "7"],
    }
    same = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for name, args in runs.items():
            csv_name = "trajectory.csv" if name == "simulate" else "curves.csv"
            _cli(args, 1, tmp / f"{name}1")
            _cli(args, 4, tmp / f"{name}4")
            # re-run from the manifest alone
            _cli([name, "--config", str(tmp / f"{name}1" / "manifest.json")], 4, tmp / f"{name}m")
            ref = (tmp / f"{name}1" / csv_name).read_bytes()
            same.append(ref == (tmp / f"{name}4" / csv_name).read_bytes()
                        == (tmp / f"{name}m" / csv_name).read_bytes())
    record(11, all(same), "byte-identical across --threads 1/4 and manifest re-run: "
                          + ", ".join(f"{n}={s}" for n, s in zip(runs, same)))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
