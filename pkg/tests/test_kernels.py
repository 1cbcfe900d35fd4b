import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mollsim import kernels as kn


def central_diff_laplacian(spec, x, h=1e-4):
    """Componentwise vector Laplacian by second differences."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    base = kn.eval_kernel(spec, x)
    for j in range(spec.d):
        e = np.zeros_like(x)
        e[j] = h
        acc += kn.eval_kernel(spec, x + e) + kn.eval_kernel(spec, x - e) - 2 * base
    return acc / h ** 2


def test_demo_formula_and_bound():
    k = kn.BoundedLipschitzDemo(d=2)
    pts = np.array([[0.3, -1.2], [2.0, 0.0], [0.0, 0.0]])
    want = -pts / (1.0 + np.sum(pts * pts, axis=1))[:, None]
    assert np.allclose(kn.eval_kernel(k, pts), want, rtol=1e-14)
    # |K| = R/(1+R^2) peaks at 1/2
    R = np.linspace(0.0, 50.0, 2001)
    assert np.max(np.abs(k.radial_magnitude(R))) <= 0.5 + 1e-15


def test_demo_laplacian_matches_finite_differences():
    for d in (1, 2):
        k = kn.BoundedLipschitzDemo(d=d)
        rng = np.random.default_rng(0)
        for _ in range(4):
            x = rng.uniform(-2.0, 2.0, size=d)
            got = k.laplacian(x)
            want = central_diff_laplacian(k, x)
            assert np.allclose(got, want, rtol=1e-5, atol=1e-5)


def test_riesz_sign_convention():
    rep = kn.RieszGradient(d=3, s=1.0, sign="repulsive")
    att = kn.RieszGradient(d=3, s=1.0, sign="attractive")
    x = np.array([0.0, 0.0, 2.0])
    assert np.allclose(kn.eval_kernel(rep, x), [0.0, 0.0, 0.25])
    assert np.allclose(kn.eval_kernel(att, x), [0.0, 0.0, -0.25])
    # repulsive means the pair drift x - y pushes the particles apart
    assert float(np.dot(kn.eval_kernel(rep, x), x)) > 0.0


def test_riesz_validation():
    with pytest.raises(ValueError):
        kn.RieszGradient(d=1, s=0.5)
    with pytest.raises(ValueError):
        kn.RieszGradient(d=3, s=0.0)
    with pytest.raises(ValueError):
        kn.RieszGradient(d=3, s=1.5)
    with pytest.raises(ValueError):
        kn.RieszGradient(d=4, s=1.0, sign="inward")


def test_riesz_laplacian_matches_finite_differences():
    k = kn.RieszGradient(d=3, s=1.0, sign="repulsive")
    for x in ([1.0, 0.2, -0.4], [0.0, 1.5, 0.0]):
        got = k.laplacian(np.array(x))
        want = central_diff_laplacian(k, np.array(x))
        assert np.allclose(got, want, rtol=1e-4, atol=1e-6)


def test_keller_segel_formula():
    k = kn.KellerSegel(d=2, chi=2.0)
    assert np.allclose(kn.eval_kernel(k, np.array([1.0, 0.0])), [-2.0, 0.0])
    x = np.array([[0.3, 0.4]])  # |x| = 0.5
    want = -2.0 * x / 0.25
    assert np.allclose(kn.eval_kernel(k, x), want, rtol=1e-14)
    assert np.allclose(k.laplacian(x), 0.0)
    assert k.far_field_rule() == "analytic-equal-to-K"
    with pytest.raises(ValueError):
        kn.KellerSegel(d=2, chi=0.0)
    with pytest.raises(ValueError):
        kn.KellerSegel(d=1, chi=1.0)


def test_singular_kernels_reject_origin():
    for spec in (kn.KellerSegel(d=2, chi=1.0),
                 kn.RieszGradient(d=3, s=1.0),
                 kn.TruncatedRiesz(d=2, alpha_sing=1.5)):
        with pytest.raises(kn.KernelDomainError):
            kn.eval_kernel(spec, np.zeros(spec.d))


def test_truncated_riesz_support():
    k = kn.TruncatedRiesz(d=2, alpha_sing=1.5)
    assert k.radial_magnitude(np.array([0.5]))[0] == pytest.approx(0.5 ** -0.5)
    assert k.radial_magnitude(np.array([1.0]))[0] == pytest.approx(1.0)
    assert k.radial_magnitude(np.array([2.0]))[0] == 0.0
    assert k.radial_magnitude(np.array([5.0]))[0] == 0.0
    mid = k.radial_magnitude(np.array([1.5]))[0]
    assert 0.0 < mid < 1.5 ** -0.5
    assert np.allclose(kn.eval_kernel(k, np.array([3.0, 0.0])), 0.0)
    with pytest.raises(ValueError):
        kn.TruncatedRiesz(d=2, alpha_sing=1.0)
    with pytest.raises(ValueError):
        kn.TruncatedRiesz(d=2, alpha_sing=2.0)


def test_custom_func_and_radial_routes_agree():
    def radial(r):
        return -r * np.exp(-r)

    def func(x):
        r = np.linalg.norm(x, axis=-1)
        mag = np.where(r > 0, radial(np.maximum(r, 1e-300)) / np.maximum(r, 1e-300), -1.0)
        return x * mag[..., None]

    a = kn.TabulatedCustom(d=2, func=func, name="expdecay")
    b = kn.TabulatedCustom(d=2, radial_func=radial, name="expdecay")
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3.0, 3.0, size=(40, 2))
    assert np.allclose(kn.eval_kernel(a, pts), kn.eval_kernel(b, pts),
                       rtol=1e-13, atol=1e-15)
    with pytest.raises(ValueError):
        kn.TabulatedCustom(d=2, name="empty")


def test_zero_kernel():
    z = kn.zero_kernel(2)
    assert z.is_zero
    pts = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert np.all(kn.eval_kernel(z, pts) == 0.0)


@pytest.mark.parametrize("p,want", [(1.0, math.inf), (math.inf, 1.0),
                                    (2.0, 2.0), (1.25, 5.0), (4.0, 4.0 / 3.0)])
def test_conjugate_exponent(p, want):
    assert kn.conjugate_exponent(p) == pytest.approx(want)


def test_assumptions_demo():
    a = kn.assumptions_for(kn.BoundedLipschitzDemo(d=1))
    assert (a.r, a.zeta) == (1.0, 1.0)
    assert a.p == math.inf and not a.p_is_upper_limit


def test_assumptions_singular_variants():
    a = kn.assumptions_for(kn.KellerSegel(d=2, chi=0.5))
    assert a.r == math.inf and a.zeta == pytest.approx(0.99)
    assert a.p == pytest.approx(2.0) and a.p_is_upper_limit

    b = kn.assumptions_for(kn.RieszGradient(d=3, s=1.0), eps_slack=0.05)
    assert b.zeta == pytest.approx(0.95)
    assert b.p == pytest.approx(1.5)

    c = kn.assumptions_for(kn.TruncatedRiesz(d=2, alpha_sing=1.5))
    assert c.p == pytest.approx(4.0)


def test_assumptions_custom_passthrough():
    stated = kn.KernelAssumptions(p=3.0, q=math.inf, r=2.0, zeta=0.7)
    k = kn.TabulatedCustom(d=1, radial_func=lambda r: -r, assumptions=stated)
    assert kn.assumptions_for(k) is stated


@settings(max_examples=60)
@given(st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=6),
       st.floats(min_value=0.1, max_value=10.0))
def test_cutoff_clamps_componentwise(vals, A):
    v = np.array(vals)
    out = kn.cutoff_apply(kn.CutoffSpec(A=A), v)
    assert np.all(np.abs(out) <= A)
    small = np.abs(v) <= A
    assert np.all(out[small] == v[small])


@pytest.mark.parametrize("spec", [
    kn.BoundedLipschitzDemo(d=1),
    kn.BoundedLipschitzDemo(d=2),
    kn.KellerSegel(d=2, chi=0.5),
    kn.RieszGradient(d=3, s=1.0),
    kn.TruncatedRiesz(d=2, alpha_sing=1.3),
])
def test_oddness(spec):
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.2, 2.5, size=(25, spec.d)) * rng.choice([-1.0, 1.0], size=(25, spec.d))
    assert spec.is_odd
    assert np.allclose(kn.eval_kernel(spec, -pts), -kn.eval_kernel(spec, pts),
                       rtol=1e-12, atol=1e-15)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        kn.CutoffSpec(A=0.0)
