import numpy as np
import pytest

from mollsim import bumps, engine, kernels, tabulate


@pytest.fixture(scope="module")
def demo_tab():
    m = bumps.standard_mollifier(1, 1.0 / 3.0, 512)
    return tabulate.get_tabulated_kernel(kernels.BoundedLipschitzDemo(d=1), m)


@pytest.fixture(scope="module")
def ks_tab():
    m = bumps.standard_mollifier(2, 0.25, 128)
    return tabulate.get_tabulated_kernel(kernels.KellerSegel(d=2, chi=0.5), m)


def brute_pair_sum(positions, tab):
    """Direct per-pair evaluation through the interpolation front end."""
    n = positions.shape[0]
    out = np.zeros_like(positions)
    for i in range(n):
        diffs = positions[i][None, :] - positions
        keep = np.linalg.norm(diffs, axis=1) > 0
        out[i] = tabulate.mollified_kernel_eval(tab, diffs[keep]).sum(axis=0)
    return out


def test_engine_name_reports_backend():
    assert engine.engine_name() in ("compiled", "python")


def test_python_blocks_do_not_change_result(demo_tab):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(37, 1))
    a = engine.pair_sum_python(x, demo_tab, block=256)
    b = engine.pair_sum_python(x, demo_tab, block=5)
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("fixture", ["demo_tab", "ks_tab"])
def test_compiled_matches_python(fixture, request):
    tab = request.getfixturevalue(fixture)
    if not engine.supports_compiled(tab) or engine.engine_name() != "compiled":
        pytest.skip("compiled backend unavailable")
    rng = np.random.default_rng(1)
    x = rng.normal(scale=0.5, size=(200, tab.d))
    a = engine.pair_sum_python(x, tab)
    b = engine.pair_sum_compiled(x, tab)
    scale = np.max(np.abs(a)) + 1e-30
    assert np.max(np.abs(a - b)) <= 1e-12 * scale


def test_single_particle_has_zero_drift(demo_tab):
    x = np.array([[0.4]])
    assert np.all(engine.pair_sum(x, demo_tab) == 0.0)


@pytest.mark.parametrize("fixture", ["demo_tab", "ks_tab"])
def test_forces_sum_to_zero(fixture, request):
    # odd field: action equals reaction, the ensemble total vanishes
    tab = request.getfixturevalue(fixture)
    rng = np.random.default_rng(2)
    x = rng.normal(scale=0.4, size=(64, tab.d))
    total = engine.pair_sum(x, tab).sum(axis=0)
    assert np.allclose(total, 0.0, atol=1e-9)


def test_pair_sum_matches_brute_force(ks_tab):
    rng = np.random.default_rng(3)
    x = rng.normal(scale=0.3, size=(25, 2))
    fast = engine.pair_sum(x, ks_tab)
    slow = brute_pair_sum(x, ks_tab)
    # the pair engines walk the multilinear table; the brute route uses the
    # cubic radial profile inside the support, so agreement is at table
    # accuracy, not machine precision
    scale = np.max(np.linalg.norm(slow, axis=1))
    assert np.max(np.linalg.norm(fast - slow, axis=1)) < 2e-3 * scale


def test_pair_sum_matches_brute_force_python_route(demo_tab):
    rng = np.random.default_rng(4)
    x = rng.normal(scale=0.8, size=(30, 1))
    fast = engine.pair_sum(x, demo_tab, force_python=True)
    slow = brute_pair_sum(x, demo_tab)
    scale = np.max(np.abs(slow))
    assert np.max(np.abs(fast - slow)) < 2e-3 * scale


def test_far_mode_params_consistent(demo_tab, ks_tab):
    for tab in (demo_tab, ks_tab):
        mode = engine.far_mode_params(tab)
        assert mode is not None
