from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from coalflow import verify as V
from coalflow.estimators import ConfigError
from coalflow.profiles import StepFunction, StepProfile, TabulatedProfile, to_step_profile

# frozen oracle values, computed independently of the package
P_MERGE = 2 * norm.cdf(-0.5)              # 0.617075...
E_MASS = 0.5 + 0.5 * P_MERGE              # 0.808537...
BOUND_CDF = 2 * (norm.cdf(0.1 * math.sqrt(10)) - 0.5)
BOUND_LINEAR = 2 * math.sqrt(0.1) * 0.1 / math.sqrt(2 * math.pi * 0.01)

UNIF = TabulatedProfile.uniform()
SINGLE = StepProfile.from_masses([1.0], [0.0])


def test_frozen_values():
    assert P_MERGE == pytest.approx(0.61708, abs=5e-6)
    assert E_MASS == pytest.approx(0.80854, abs=5e-6)
    assert BOUND_CDF == pytest.approx(0.24817, abs=5e-6)
    assert BOUND_LINEAR == pytest.approx(0.25231, abs=5e-6)


# --- oracles --------------------------------------------------------------------

def test_two_particle_oracle_values():
    o = V.two_particle_oracle(V.TwoParticleSpec(), 0.01)
    assert o.probability == pytest.approx(P_MERGE, rel=1e-12)
    assert o.mean_mass == pytest.approx(E_MASS, rel=1e-12)
    assert o.mean_position == 0.0


def test_two_particle_oracle_limits():
    far = V.two_particle_oracle(V.TwoParticleSpec(gap=1e6), 1.0)
    assert far.probability == 0 and far.mean_mass == 0.5
    late = V.two_particle_oracle(V.TwoParticleSpec(), math.inf)
    assert late.probability == 1 and late.mean_mass == 1.0


@given(t1=st.floats(1e-5, 1.0), t2=st.floats(1e-5, 1.0), gap=st.floats(0.01, 1.0),
       m1=st.floats(0.1, 2.0), m2=st.floats(0.1, 2.0))
def test_two_particle_oracle_monotone(t1, t2, gap, m1, m2):
    spec = V.TwoParticleSpec(m1, m2, gap)
    lo, hi = sorted((t1, t2))
    assert V.coalescence_probability(spec, lo) <= V.coalescence_probability(spec, hi)
    wider = V.TwoParticleSpec(m1, m2, 2 * gap)
    assert V.coalescence_probability(wider, hi) <= V.coalescence_probability(spec, hi)
    o = V.two_particle_oracle(spec, hi)
    assert m1 <= o.mean_mass <= m1 + m2


@pytest.mark.parametrize("spec", [V.TwoParticleSpec(), V.TwoParticleSpec(0.3, 1.2, 0.05, 1.0)])
@pytest.mark.parametrize("t", [1e-4, 3e-3, 0.05])
def test_two_particle_qv_closed_form(spec, t):
    def inv_mass(s):
        p = V.coalescence_probability(spec, s)
        return (1 - p) / spec.m1 + p / spec.total_mass
    ref, _ = integrate.quad(inv_mass, 0, t, epsabs=1e-14, epsrel=1e-12)
    assert V.two_particle_qv(spec, t) == pytest.approx(ref, rel=1e-9)


def test_small_mass_bound_values():
    cdf, lin = V.small_mass_bound(0.1, 0.1, 0.01)
    assert cdf == pytest.approx(BOUND_CDF, rel=1e-12)
    assert lin == pytest.approx(BOUND_LINEAR, rel=1e-12)
    assert cdf <= lin
    assert V.small_mass_bound(0.0, 0.1, 0.01) == (0.0, 0.0)


# --- verdict logic --------------------------------------------------------------

def test_band_verdict():
    assert V.band_verdict(0.33, 0.01, 0.27, 0.39) == V.PASS
    assert V.band_verdict(0.45, 0.01, 0.27, 0.39) == V.FAIL
    assert V.band_verdict(0.40, 0.01, 0.27, 0.39) == V.INCONCLUSIVE


def test_combine_and_bonferroni():
    assert V.combine_verdicts([V.PASS, V.PASS]) == V.PASS
    assert V.combine_verdicts([V.PASS, V.INCONCLUSIVE]) == V.INCONCLUSIVE
    assert V.combine_verdicts([V.INCONCLUSIVE, V.FAIL]) == V.FAIL
    assert V.combine_verdicts([]) == V.INCONCLUSIVE
    assert V.bonferroni_z(1) == pytest.approx(V.Z95)
    assert V.bonferroni_z(10) == pytest.approx(norm.ppf(1 - 0.0025))


def test_report_serialization():
    rep = V.VerificationReport("x", V.PASS, {"a": np.float64(1.5)}, {"v": np.arange(3)},
                               {"t": math.inf}, replicates=10)
    doc = json.loads(rep.to_json())
    assert doc["observed"]["v"] == [0, 1, 2] and doc["target"]["t"] == "inf"
    table = V.format_reports([rep])
    assert table.splitlines()[0].split()[:2] == ["check", "verdict"]
    assert json.loads(V.reports_to_json([rep]))["verdict"] == V.PASS


# --- two-particle and QV checks -------------------------------------------------

def test_check_two_particle_reduced():
    # 4000 replicates: se of the frequency is 0.0077, so a 0.03 band is ~4 se
    rep = V.check_two_particle(replicates=4000, seed=1, dt=1e-5, tol=0.03)
    assert rep.verdict == V.PASS, rep.rows


def test_qv_two_particle_reduced():
    rep = V.check_qv_two_particle(times=np.geomspace(1e-4, 1e-2, 5), replicates=4000, seed=2,
                                  dt=1e-5)
    assert rep.verdict == V.PASS, rep.rows


def test_qv_single_cluster_exact():
    rep = V.check_qv_identity(SINGLE, 0.5, [1e-3, 1e-2], replicates=4000, seed=3, dt=1e-4)
    assert rep.verdict == V.PASS
    for row in rep.rows:
        assert row["qv"] == pytest.approx(row["t"], rel=1e-12) and row["qv_se"] < 1e-15


def test_qv_with_step_test_function():
    h = StepFunction(np.array([0, .25, .5, 1.0]), np.array([1.0, -1.0, 0.0]))
    rep = V.check_qv_identity(UNIF, 0.5, np.geomspace(1e-4, 1e-2, 4), replicates=2000, seed=4,
                              dt=1e-6, level=5, h=h)
    assert rep.verdict == V.PASS, rep.rows
    assert {r["quantity"] for r in rep.rows} == {"position", "h"}


def test_qv_orthogonal_test_function_vanishes():
    # oscillates inside every initial piece, so its projection on any coarsening is zero
    bp = np.linspace(0, 1, 2**7 + 1)
    h = StepFunction(bp, np.tile([1.0, -1.0], 2**6))
    rep = V.check_qv_identity(UNIF, 0.5, [1e-4, 1e-3], replicates=500, seed=5, dt=1e-5,
                              level=6, h=h)
    h_rows = [r for r in rep.rows if r["quantity"] == "h"]
    assert all(r["variance"] == 0 and r["qv"] == 0 for r in h_rows)


def test_resolution_ratio():
    g = to_step_profile(UNIF, 10)
    assert V.resolution_ratio(g, 1e-6) == pytest.approx(math.sqrt(1e-6 * 2048) * 1024)
    assert V.resolution_ratio(SINGLE, 1.0) == 0.0


# --- bounds and envelopes -------------------------------------------------------

def test_mass_bound_reduced_with_flat_control():
    base = to_step_profile(UNIF, 8)
    masses = np.asarray(base.masses)
    vals = np.asarray(base.values).copy()
    # flatten [0.4, 0.6): those pieces start at one point and must stay together
    flat = (base.breakpoints[:-1] >= 0.4 - 1e-12) & (base.breakpoints[:-1] < 0.6 - 1e-12)
    vals[flat] = vals[flat].mean()
    prof = StepProfile.from_masses(masses, vals)
    triples = [(0.5, 0.1, 1e-2), (0.3, 0.05, 1e-3), (0.7, 0.2, 1e-4), (0.45, 0.1, 1e-2)]
    rep = V.check_mass_bound(prof, triples, replicates=2000, seed=6, dt=2e-5)
    assert rep.verdict == V.PASS, rep.rows
    control = rep.rows[-1]
    assert control["G"] == 0 and control["count"] == 0 and control["bound"] == 0


def test_mass_bound_domain_error():
    with pytest.raises(ConfigError):
        V.check_mass_bound(UNIF, [(0.5, 0.6, 0.01)], replicates=10, level=4)


def test_inverse_mass_integral():
    rep = V.check_inverse_mass_integral(UNIF, 1.0, replicates=2000, seed=7, dt=1e-5, level=8)
    assert rep.verdict == V.PASS
    single = V.check_inverse_mass_integral(SINGLE, 0.5, replicates=100, seed=7, dt=1e-4)
    assert single.verdict == V.PASS
    assert all(r["mean"] == 1.0 for r in single.rows)
    with pytest.raises(ConfigError):
        V.check_inverse_mass_integral(UNIF, 1.5, level=4)


def test_moment_growth_single_cluster():
    rep = V.check_moment_growth(SINGLE, 0.0, replicates=2000, seed=8, dt=1e-5)
    assert rep.verdict == V.PASS
    assert rep.observed["slope"] == pytest.approx(1.0, abs=0.05)


def test_moment_growth_coalescing_grows_slower():
    # merging slows the spread: E||X - g||^2 = ∫ Var X(u) du grows like t**(2/3)
    rep = V.check_moment_growth(UNIF, 0.0, replicates=2000, seed=8, dt=1e-5, level=8)
    assert rep.observed["slope"] < 0.8
    assert rep.verdict == V.FAIL


# --- martingale -----------------------------------------------------------------

def test_martingale_passes_and_drift_fails():
    args = dict(u0s=(0.25, 0.5), t_pairs=((1e-3, 1e-2),), replicates=2000, seed=9, dt=1e-5, level=7)
    assert V.check_martingale(UNIF, **args).verdict == V.PASS
    bad = V.check_martingale(UNIF, drift=5.0, **args)
    assert bad.verdict == V.FAIL
    assert any(r["test"] == "mean" and r["verdict"] == V.FAIL for r in bad.rows)


def test_martingale_single_cluster():
    rep = V.check_martingale(SINGLE, (0.5,), ((0.01, 0.1),), replicates=2000, seed=10, dt=1e-3)
    assert rep.verdict == V.PASS


# --- exponents ------------------------------------------------------------------

def test_exponent_hypotheses():
    rep = V.check_mass_exponent(SINGLE, 0.5, replicates=200, dt=1e-5, alpha=1.0)
    assert rep.verdict == V.INCONCLUSIVE and "hypotheses not met" in rep.notes[0]
    with pytest.raises(ConfigError):
        V.check_mass_exponent(TabulatedProfile.power(0.5, 0.5), 0.5, replicates=10, level=4)
    with pytest.raises(ConfigError):
        V.check_mass_exponent(to_step_profile(UNIF, 4), 0.5, replicates=10)


def test_displacement_free_diffusion_control():
    rep = V.check_displacement_exponent(SINGLE, 0.5, replicates=4000, seed=11, dt=1e-6)
    assert rep.verdict == V.PASS
    assert rep.observed["slope_displacement"] == pytest.approx(0.5, abs=0.02)


def test_exponents_reduced_uniform():
    run = V.exponent_run(UNIF, 0.5, replicates=2000, seed=12, dt=2e-6, level=9)
    m = V.check_mass_exponent(UNIF, 0.5, dt=2e-6, run=run)
    d = V.check_displacement_exponent(UNIF, 0.5, dt=2e-6, run=run)
    assert m.verdict == V.PASS and d.verdict == V.PASS


# --- rescaling, convergence, pathwise -------------------------------------------

def test_rescaling_rho_one_trivial():
    rep = V.check_rescaling(rho=1.0, replicates=500, seed=13, level=7, dt=2e-5, exact_replicates=1)
    assert rep.observed["mass_identity_exact"] is True
    assert rep.verdict == V.PASS


def test_rescaling_boundary_is_inconclusive():
    rep = V.check_rescaling(rho=0.5, times=(1e-2, 3e-2, 1e-1), replicates=200, seed=14, C=1.0,
                            level=6, dt=1e-4, exact_replicates=1)
    assert rep.verdict == V.INCONCLUSIVE
    assert any("boundary" in n for n in rep.notes)


def test_dyadic_step_input_zero_differences():
    g = TabulatedProfile(1.0, [0, .25, .5, .75], [0.0, 1.0, 2.0, 3.0])
    rep = V.check_dyadic_convergence(g, [2, 3, 4], t=0.01, replicates=500, seed=15, dt=1e-4)
    assert rep.verdict == V.PASS
    for row in rep.rows:
        assert row["differences"] == [0.0, 0.0]


def test_dyadic_at_time_zero_is_deterministic():
    g = TabulatedProfile.from_function(lambda u: u * u)
    rep = V.check_dyadic_convergence(g, range(6, 11), t=0.0)
    assert rep.verdict == V.PASS
    pos = next(r for r in rep.rows if r["statistic"] == "position")
    expect = [float(to_step_profile(g, n)(0.5)) for n in range(6, 11)]
    assert pos["estimates"] == expect
    assert np.all(np.diff(pos["differences"]) < 0)
    with pytest.raises(ConfigError):
        V.check_dyadic_convergence(g, [6, 7], t=0.0)


def test_lil_window_and_negative_control():
    args = dict(replicates=300, seed=16, level=10, dt=1e-6)
    assert V.check_lil_pathwise(UNIF, **args).verdict == V.PASS
    wrong = V.check_lil_pathwise(UNIF, exponent=1.0, **args)
    assert wrong.verdict == V.FAIL and wrong.observed["fraction"] < 0.05
    single = V.check_lil_pathwise(SINGLE, alpha=1.0, **args)
    assert single.verdict == V.INCONCLUSIVE
    short = V.check_lil_pathwise(UNIF, n_min=13, n_max=15, **args)
    assert short.verdict == V.INCONCLUSIVE and short.notes == ["window too small"]


def test_center_of_mass():
    # the chi-square verdict is a 95% statement; here assert the statistic at ~3.3 se
    n = 2000
    for prof, target in ((to_step_profile(UNIF, 5), 0.1),
                         (StepProfile.from_masses([1.0, 1.0], [0.0, 0.3]), 0.05)):
        rep = V.check_center_of_mass(prof, 0.1, replicates=n, seed=17, dt=1e-3)
        assert rep.target["variance"] == target
        assert abs(rep.observed["variance"] / target - 1) < 3.3 * math.sqrt(2 / (n - 1))
        lo, hi = rep.ci["mean"]
        assert abs(rep.observed["mean"]) < 3.3 / V.Z95 * 0.5 * (hi - lo)


def test_fuzz_small():
    rep = V.fuzz_invariants(total_steps=50_000, d=64, steps_per_profile=5_000, seed=18)
    assert rep.verdict == V.PASS and rep.observed["steps"] == 50_000


def test_unknown_suite():
    with pytest.raises(ConfigError):
        V.run_suite("nope")
