import numpy as np
import pytest

from mollsim import grids, initial, kernels, pde

import oracles as oc


DEMO1 = kernels.BoundedLipschitzDemo(d=1)
KS2 = kernels.KellerSegel(d=2, chi=0.5)


def gaussian_field(d, L, n, variance):
    center = (0.0,) * d
    law = initial.IsotropicGaussian(center=center, variance=variance)
    return initial.density_on_grid(law, grids.GridSpec(d=d, L=L, n=n)), law


def test_analytic_symbol_demo_matches_quadrature_oracle():
    g = grids.GridSpec(d=1, L=10.0, n=64)
    sym = np.asarray(pde.analytic_symbol(g, DEMO1))
    k = g.wavenumbers()
    for i in (1, 3, 10, 40):
        want = oc.demo_symbol_quad(k[i])
        # the oracle quadrature itself carries ~1e-11 absolute error
        assert abs(sym[i, 0] - want) <= 1e-10 + 1e-8 * abs(want)


def test_analytic_symbol_ks_matches_truncated_quadrature_oracle():
    # multiplying the full-space symbol by the truncation factor must
    # reproduce an independent quadrature of the truncated kernel
    g = grids.GridSpec(d=2, L=4.0, n=16)
    sym = np.asarray(pde.analytic_symbol(g, KS2))
    kx = g.wavenumbers()
    X = 4.0
    from scipy.special import j0
    for (i, j) in ((1, 0), (2, 3), (5, 1)):
        kv = np.array([kx[i], kx[j]])
        kn = np.linalg.norm(kv)
        got = sym[i, j] * (1.0 - j0(kn * X))
        want = oc.ks_symbol_quad(kv, KS2.chi, X)
        assert np.linalg.norm(got - want) <= 1e-6 * np.linalg.norm(want)


def test_analytic_route_equals_periodized_convolution():
    """Sampling the full-space transform on the lattice is the same as
    convolving with the image-summed kernel; checked against the
    closed-form periodization."""
    L, n = 10.0, 512
    u, _ = gaussian_field(1, L, n, 0.5)
    conv = np.asarray(pde.convolve_kernel(u, kernel=DEMO1,
                                          mode="analytic_symbol"))[:, 0]
    ax = u.spec.axis()
    per = np.array([oc.periodized_demo_1d(z, L) for z in ax])
    want = np.real(np.fft.ifft(np.fft.fft(u.values)
                               * np.fft.fft(np.roll(per, -n // 2)))) \
        * u.spec.spacing
    assert np.max(np.abs(conv - want)) < 1e-9


def test_transform_modes_agree_where_mass_lives():
    # the grid mode folds box-truncated tails, the analytic mode image
    # sums; they may differ at the empty box edge but not on the density
    u, _ = gaussian_field(1, 10.0, 512, 0.5)
    a = np.asarray(pde.convolve_kernel(u, kernel=DEMO1,
                                       mode="analytic_symbol"))[:, 0]
    b = np.asarray(pde.convolve_kernel(u, kernel=DEMO1,
                                       mode="mollified_grid", alpha=0.25))[:, 0]
    w = u.values
    gap = np.max(np.abs((a - b) * w)) / np.max(np.abs(a * w))
    assert gap < 0.05


def test_heat_step_spreads_gaussian_exactly():
    u, _ = gaussian_field(1, 8.0, 512, 0.25)
    dt = 0.125
    out = pde.heat_step(u, dt)
    ax = u.spec.axis()
    want = oc.gaussian_density(ax[:, None], 0.25 + 2.0 * dt, 1)
    assert np.max(np.abs(out.values - want)) < 1e-12
    assert out.time == pytest.approx(u.time + dt)


def test_zero_kernel_solution_is_heat_flow():
    u0, _ = gaussian_field(1, 8.0, 256, 0.25)
    cfg = pde.PdeConfig(kernel=kernels.zero_kernel(1), box=8.0, n=256,
                        dt=0.025, T=0.5)
    sol = pde.solve_mild(u0, cfg, snapshot_times=(0.5,))
    got = sol.field_at(0.5).values
    ax = u0.spec.axis()
    want = oc.gaussian_density(ax[:, None], 0.25 + 1.0, 1)
    # exact multipliers, so only fft round-off accumulates over 20 steps
    assert np.max(np.abs(got - want)) < 1e-11


def test_mass_conserved_demo():
    u0, _ = gaussian_field(1, 8.0, 256, 0.25)
    cfg = pde.PdeConfig(kernel=DEMO1, box=8.0, n=256, dt=0.005, T=0.5)
    sol = pde.solve_mild(u0, cfg, snapshot_times=(0.25, 0.5))
    for s in sol.snapshots:
        assert s.integral() == pytest.approx(1.0, abs=1e-12)


def test_mass_conserved_ks_subcritical():
    u0, _ = gaussian_field(2, 4.0, 64, 0.25)
    cfg = pde.PdeConfig(kernel=KS2, box=4.0, n=64, dt=0.002, T=0.1)
    sol = pde.solve_mild(u0, cfg, snapshot_times=(0.1,))
    assert sol.field_at(0.1).integral() == pytest.approx(1.0, abs=1e-12)
    assert sol.min_value > -1e-6


def test_self_convergence_reported_small():
    u0, _ = gaussian_field(1, 8.0, 256, 0.25)
    cfg = pde.PdeConfig(kernel=DEMO1, box=8.0, n=256, dt=0.01, T=0.2)
    sol = pde.solve_mild(u0, cfg)
    assert 0.0 <= sol.self_convergence < 1e-2


def test_drift_sup_matches_defined_field():
    u0, _ = gaussian_field(1, 8.0, 512, 0.25)
    cfg = pde.PdeConfig(kernel=DEMO1, box=8.0, n=512, dt=0.01, T=0.1)
    sol = pde.solve_mild(u0, cfg)
    conv = np.asarray(pde.convolve_kernel(u0, kernel=DEMO1))
    # the solver's sup is taken over its dealiased drift, so it sits a
    # fraction below the raw spectral convolution
    assert sol.drift_sup == pytest.approx(np.max(np.abs(conv)), rel=0.02)
    # the demo field is globally bounded by 1/2, convolution preserves it
    assert sol.drift_sup <= 0.5 + 1e-12


def test_field_at_lookup():
    u0, _ = gaussian_field(1, 8.0, 128, 0.25)
    cfg = pde.PdeConfig(kernel=kernels.zero_kernel(1), box=8.0, n=128,
                        dt=0.05, T=0.2)
    sol = pde.solve_mild(u0, cfg, snapshot_times=(0.1, 0.2))
    assert sol.field_at(0.1).time == pytest.approx(0.1)
    with pytest.raises(KeyError):
        sol.field_at(0.13)


def test_dealias_mask_two_thirds():
    g = grids.GridSpec(d=1, L=1.0, n=256)
    frac = float(np.mean(pde.dealias_mask(g)))
    assert abs(frac - 2.0 / 3.0) < 0.02
    g2 = grids.GridSpec(d=2, L=1.0, n=64)
    frac2 = float(np.mean(pde.dealias_mask(g2)))
    assert abs(frac2 - (2.0 / 3.0) ** 2) < 0.03


def test_cfl_bound_shrinks_with_stronger_drift():
    u0, _ = gaussian_field(2, 4.0, 64, 0.25)
    weak = pde.kernel_symbol(u0.spec, kernels.KellerSegel(d=2, chi=0.2))
    strong = pde.kernel_symbol(u0.spec, kernels.KellerSegel(d=2, chi=2.0))
    b_weak = pde.cfl_bound(u0, weak)
    b_strong = pde.cfl_bound(u0, strong)
    assert 0.0 < b_strong < b_weak


def test_solver_rejects_oversized_dt():
    u0, _ = gaussian_field(2, 2.0, 64, 0.05)
    cfg = pde.PdeConfig(kernel=kernels.KellerSegel(d=2, chi=50.0),
                        box=2.0, n=64, dt=0.05, T=1.0, self_check=False)
    with pytest.raises(ValueError, match="CFL"):
        pde.solve_mild(u0, cfg)


def test_solver_aborts_on_negativity():
    # an under-resolved aggregation undershoots; a tight floor trips it
    u0, _ = gaussian_field(2, 2.0, 32, 0.05)
    cfg = pde.PdeConfig(kernel=kernels.KellerSegel(d=2, chi=2.0),
                        box=2.0, n=32, dt=1e-4, T=0.02,
                        self_check=False, negativity_floor=-1e-15)
    with pytest.raises(pde.PdeAbort):
        pde.solve_mild(u0, cfg)


def test_snapshot_times_validated():
    u0, _ = gaussian_field(1, 8.0, 128, 0.25)
    cfg = pde.PdeConfig(kernel=kernels.zero_kernel(1), box=8.0, n=128,
                        dt=0.05, T=0.2)
    with pytest.raises(ValueError):
        pde.solve_mild(u0, cfg, snapshot_times=(0.3,))  # beyond T
