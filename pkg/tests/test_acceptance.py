"""Acceptance gate: one test per shipped claim, at the stated tolerance
and runtime budget.

Each test prints a single "[criterion k] PASS/FAIL" line carrying the
measured numbers, then asserts.  The slope studies run the shipped
experiment configs unmodified (output redirected into the pytest tmp
tree).  Nothing here loosens a band: a claim the implementation cannot
meet fails loudly instead of being tuned green.
"""

import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

import oracles as oc
from conftest import load_experiment
from mollsim import bumps, harness, kernels, rates, tabulate
from mollsim.grids import GridField, GridSpec
from mollsim.initial import IsotropicGaussian, density_on_grid
from mollsim.particles import SimConfig, simulate
from mollsim.pde import PdeConfig, solve_mild


def _crit(num, ok, detail):
    line = "[criterion %02d] %s  %s" % (num, "PASS" if ok else "FAIL",
                                        detail)
    print(line, flush=True)
    return line


# ---------------------------------------------------------------------------
# shared heavy runs (module scope: each shipped study executes once)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def demo_coupled(tmp_path_factory):
    cfg = load_experiment("demo_d1_coupled",
                          tmp_path_factory.mktemp("demo_coupled"))
    t0 = time.perf_counter()
    rec = harness.run_sweep(cfg)
    return cfg, rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def hstudy(tmp_path_factory):
    cfg = load_experiment("demo_d1_hstudy",
                          tmp_path_factory.mktemp("demo_hstudy"))
    t0 = time.perf_counter()
    rec = harness.run_sweep(cfg)
    return cfg, rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def marginal_study(tmp_path_factory):
    cfg = load_experiment("demo_d1_marginal",
                          tmp_path_factory.mktemp("demo_marginal"))
    t0 = time.perf_counter()
    rec = harness.run_thm2(cfg)
    return cfg, rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ks_sweep(tmp_path_factory):
    cfg = load_experiment("ks_d2_subcritical",
                          tmp_path_factory.mktemp("ks_subcritical"))
    t0 = time.perf_counter()
    rec = harness.run_sweep(cfg)
    return cfg, rec, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# 1. exponent tables, exact arithmetic
# ---------------------------------------------------------------------------

def test_criterion_01_exponent_tables_exact():
    t0 = time.perf_counter()
    F = Fraction
    for d in (1, 2, 3):
        a = rates.optimal_alpha(d, 1, 1)
        assert a == F(1, d + 2)
        e = rates.exponents(d, 1, 1, a)
        assert e.v1 == F(1, d + 2) and e.v1 == e.rho
        assert e.v2 == 0 and e.v3 == F(1, 2)
    for d in (2, 3):
        a = rates.optimal_alpha(d, math.inf, 1)
        assert a == F(1, 2 * (d + 1))
        e = rates.exponents(d, math.inf, 1, a)
        assert e.v1 == F(1, 2 * (d + 1))
        assert e.v2 == F(d, 2 * (d + 1)) and e.v3 == F(1, 2)
    ks = rates.exponents(2, math.inf, 1, rates.optimal_alpha(2, math.inf, 1))
    assert ks.rho == F(1, 6) and ks.v2 == F(1, 3)
    dt = time.perf_counter() - t0
    ok = dt < 1.0
    line = _crit(1, ok, "exact exponent tables for both kernel families "
                        "and the planar chemotaxis point (%.3fs)" % dt)
    assert ok, line


# ---------------------------------------------------------------------------
# 2. cost-model exponents, unreconciled figures annotated
# ---------------------------------------------------------------------------

def test_criterion_02_cost_exponents_annotated():
    t0 = time.perf_counter()
    demo = rates.summary(1, 1, 1)
    assert demo["cost_exponent"] == 8.0
    assert demo["exact"]["cost_exponent"] == "8"
    assert demo["annotations"] == []
    for d in (2, 3):
        s = rates.summary(d, math.inf, 1)
        assert s["cost_exponent"] == float(6 * d + 6)
        assert s["exact"]["cost_exponent"] == str(6 * d + 6)
        assert s["cost_exponent"] != 6 * d + 5
        notes = " ".join(s["annotations"])
        assert "unreconciled" in notes
        assert "6d+5" in notes and str(6 * d + 5) in notes
        assert "11" in notes
    dt = time.perf_counter() - t0
    ok = dt < 1.0
    line = _crit(2, ok, "cost exponents 8 and 6d+6 exact; 6d+5 and the "
                        "d=2 value 11 flagged unreconciled (%.3fs)" % dt)
    assert ok, line


# ---------------------------------------------------------------------------
# 3. tabulated convolution vs brute quadrature
# ---------------------------------------------------------------------------

def _near_far_check(spec, m, oracle, rng):
    tab = tabulate.get_tabulated_kernel(spec, m)
    eps = m.epsilon
    worst = 0.0
    for _ in range(20):
        u = rng.normal(size=m.d)
        u /= np.linalg.norm(u)
        x = eps * rng.uniform(0.2, 0.95) * u
        got = tabulate.mollified_kernel_eval(tab, x)
        want = np.asarray(oracle(x))
        rel = np.linalg.norm(got - want) / np.linalg.norm(want)
        worst = max(worst, rel)
    far_worst = 0.0
    for scale in (1.05, 1.5, 2.5, 4.0):
        u = rng.normal(size=m.d)
        u /= np.linalg.norm(u)
        x = eps * scale * u
        got = tabulate.mollified_kernel_eval(tab, x)
        want = kernels.eval_kernel(spec, x[None])[0]
        far_worst = max(far_worst, np.linalg.norm(got - want)
                        / np.linalg.norm(want))
    return worst, far_worst


def test_criterion_03_tabulated_convolution_matches_quadrature():
    rng = np.random.default_rng(20260825)
    chi = 1.0

    t0 = time.perf_counter()
    m2 = bumps.MollifierParams(d=2, alpha=0.25, N=256)
    near_ks, far_ks = _near_far_check(
        kernels.KellerSegel(d=2, chi=chi), m2,
        lambda x: oc.mollified_ks_2d(x, chi, m2.epsilon), rng)
    dt_ks = time.perf_counter() - t0

    t0 = time.perf_counter()
    m3 = bumps.MollifierParams(d=3, alpha=0.125, N=256)
    near_cb, far_cb = _near_far_check(
        kernels.RieszGradient(d=3, s=1.0, sign="repulsive"), m3,
        lambda x: oc.mollified_coulomb_3d(x, m3.epsilon, sign=1.0), rng)
    dt_cb = time.perf_counter() - t0

    ok = (near_ks <= 1e-4 and near_cb <= 1e-4
          and far_ks <= 1e-6 and far_cb <= 1e-6
          and dt_ks < 120.0 and dt_cb < 120.0)
    line = _crit(3, ok, "near-field rel err %.2e (chemotaxis d=2, %.1fs), "
                        "%.2e (Coulomb d=3, %.1fs); far-field rel err "
                        "%.1e / %.1e vs raw kernel"
                 % (near_ks, dt_ks, near_cb, dt_cb, far_ks, far_cb))
    assert ok, line


# ---------------------------------------------------------------------------
# 4. driftless exactness: heat flow and endpoint law
# ---------------------------------------------------------------------------

def test_criterion_04_driftless_exactness():
    t0 = time.perf_counter()
    grid = GridSpec(d=1, L=8.0, n=256)
    x = grid.axis()
    u0 = GridField(grid, oc.gaussian_density(x[:, None], 0.25, 1))
    pcfg = PdeConfig(kernel=kernels.zero_kernel(1), box=8.0, n=256,
                     dt=0.025, T=0.5)
    sol = solve_mild(u0, pcfg, snapshot_times=(0.5,))
    want = oc.gaussian_density(x[:, None], 0.25 + 2.0 * 0.5, 1)
    pde_gap = float(np.max(np.abs(sol.field_at(0.5).values - want)))

    sim = SimConfig(N=10_000, d=1, h=0.05, T=0.5, A=4.0,
                    kernel=kernels.zero_kernel(1),
                    mollifier=bumps.standard_mollifier(1, 1.0 / 3.0, 10_000),
                    initial_law=IsotropicGaussian(center=(0.0,),
                                                  variance=0.25),
                    seed=2024, snapshot_times=(0.5,))
    xs = simulate(sim)[-1].positions[:, 0]
    pval = scipy.stats.kstest(xs / math.sqrt(1.25), "norm").pvalue

    dt = time.perf_counter() - t0
    ok = pde_gap <= 1e-6 and pval > 0.01 and dt < 60.0
    line = _crit(4, ok, "zero-kernel solver vs analytic heat flow sup gap "
                        "%.2e (<=1e-6); endpoint law KS p-value %.3f "
                        "(>0.01) at N=10^4 (%.1fs)" % (pde_gap, pval, dt))
    assert ok, line


# ---------------------------------------------------------------------------
# 5. mass conservation and measure leakage
# ---------------------------------------------------------------------------

def test_criterion_05_mass_conservation_and_leakage(ks_sweep):
    cfg, rec, _ = ks_sweep
    t0 = time.perf_counter()
    grid = cfg.measure_grid
    u0 = density_on_grid(cfg.initial_law, grid)
    pcfg = PdeConfig(kernel=cfg.kernel, box=cfg.measure_L, n=cfg.measure_n,
                     dt=cfg.pde_dt, T=cfg.T, self_check=False)
    steps = round(cfg.T / cfg.pde_dt)
    assert steps >= 1000
    sol = solve_mild(u0, pcfg, snapshot_times=(cfg.T,))
    drift = abs(sol.field_at(cfg.T).integral() - u0.integral())

    leaks = [c["extras"]["boundary_loss"] for c in rec["cells"]]
    masses_ok = all(math.isfinite(v) for v in leaks)
    leak = max(leaks)

    dt = time.perf_counter() - t0
    ok = drift <= 1e-10 and leak < 1e-3 and masses_ok and dt < 300.0
    line = _crit(5, ok, "solver mass drift %.2e over %d steps (<=1e-10); "
                        "worst smoothed-measure boundary leakage %.2e "
                        "(<1e-3) across %d cells (%.1fs)"
                 % (drift, steps, leak, len(leaks), dt))
    assert ok, line


# ---------------------------------------------------------------------------
# 6. N-slope at balanced step size
# ---------------------------------------------------------------------------

def test_criterion_06_interaction_error_n_slope(demo_coupled):
    cfg, rec, elapsed = demo_coupled
    assert rec["status"] == "complete"
    fit = rec["fits"]["n_slope"]
    slope = fit["slope"]
    target = -float(cfg.exponents().rho)
    assert target == pytest.approx(-1.0 / 3.0)
    ok = abs(slope - target) <= 0.15 and elapsed < 1800.0
    verdict = next(v for v in rec["verdicts"] if v["name"] == "n_slope")
    assert verdict["pass"] == (abs(slope - target) <= 0.15)
    line = _crit(6, ok, "coupled-step N-sweep slope %.4f vs target -1/3 "
                        "(band 0.15, stderr %.4f, R2 %.4f, %.0fs)"
                 % (slope, fit["stderr"], fit["r_squared"], elapsed))
    assert ok, line


# ---------------------------------------------------------------------------
# 7. h-slope at fixed N after plateau subtraction
# ---------------------------------------------------------------------------

def test_criterion_07_step_size_slope(hstudy):
    cfg, rec, elapsed = hstudy
    assert rec["status"] == "complete"
    fit = rec["fits"]["h_slope"]
    assert fit["plateau_subtracted"] is True
    slope = fit["slope"]
    ok = abs(slope - 0.5) <= 0.2 and elapsed < 2700.0
    line = _crit(7, ok, "plateau-subtracted h-ladder slope %.4f vs target "
                        "+1/2 (band 0.2, %d points dropped, stderr %.4f, "
                        "%.0fs)" % (slope, fit["points_dropped"],
                                    fit["stderr"], elapsed))
    assert ok, line


# ---------------------------------------------------------------------------
# 8. weighted marginal error decreases; domination ratio stable
# ---------------------------------------------------------------------------

def test_criterion_08_marginal_error_monotone(marginal_study):
    cfg, rec, elapsed = marginal_study
    assert rec["status"] == "complete"
    verdicts = {v["name"]: v for v in rec["verdicts"]}
    dec = verdicts["weighted_error_decreasing"]
    stab = verdicts["domination_ratio_stable"]
    medians = [row["weighted_error_median"] for row in rec["medians"]]
    ok = dec["pass"] and stab["pass"] and elapsed < 2700.0
    line = _crit(8, ok, "weighted marginal error medians %s (strictly "
                        "decreasing: %s); domination-ratio spread %.3f "
                        "(band 0.25: %s) (%.0fs)"
                 % (["%.4g" % v for v in medians], dec["pass"],
                    stab["value"], stab["pass"], elapsed))
    assert ok, line


# ---------------------------------------------------------------------------
# 9. smoothed density stays bounded in L2 uniformly in N
# ---------------------------------------------------------------------------

def test_criterion_09_ks_density_boundedness(ks_sweep):
    cfg, rec, elapsed = ks_sweep
    assert rec["status"] == "complete"
    fit = rec["fits"]["density_n_slope"]
    slope = fit["slope"]
    ok = abs(slope) <= 0.1 and elapsed < 1800.0
    verdict = next(v for v in rec["verdicts"]
                   if v["name"] == "density_l2_flat")
    assert verdict["pass"] == (abs(slope) <= 0.1)
    line = _crit(9, ok, "sup-t L2 density log-log slope %.4f vs 0 "
                        "(band 0.1, R2 %.3f, %.0fs)"
                 % (slope, fit["r_squared"], elapsed))
    assert ok, line


# ---------------------------------------------------------------------------
# 10. determinism and interrupted resume
# ---------------------------------------------------------------------------

def test_criterion_10_determinism_and_resume(tmp_path):
    t0 = time.perf_counter()
    cfg_a = load_experiment("smoke_tiny", tmp_path / "a")
    rec_a = harness.run_sweep(cfg_a)
    cfg_b = load_experiment("smoke_tiny", tmp_path / "b")
    rec_b = harness.run_sweep(cfg_b)
    rerun_same = (harness.strip_volatile(rec_a)
                  == harness.strip_volatile(rec_b))

    cfg_c = load_experiment("smoke_tiny", tmp_path / "c")
    harness.run_sweep(cfg_c)
    results = os.path.join(cfg_c.output_dir, "results.jsonl")
    lines = open(results).read().splitlines()
    with open(results, "w") as fh:
        fh.write("\n".join(lines[:2]) + "\n")
    os.remove(os.path.join(cfg_c.output_dir, "run_record.json"))
    rec_c = harness.run_sweep(cfg_c, resume=True)
    resumed_same = (harness.strip_volatile(rec_c)
                    == harness.strip_volatile(rec_a))

    dt = time.perf_counter() - t0
    ok = rerun_same and resumed_same and dt < 600.0
    line = _crit(10, ok, "rerun identical modulo timestamps: %s; resume "
                         "after 2/%d cells identical: %s (%.1fs)"
                 % (rerun_same, len(lines), resumed_same, dt))
    assert ok, line
