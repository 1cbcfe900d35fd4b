"""Pair-interaction engine: compiled inner loop with a numpy fallback.

The compiled extension is optional; availability is decided at import and
recorded so run metadata can state which engine produced a result.
"""

import numpy as np

from .bumps import bump_second_moment
from .kernels import (BoundedLipschitzDemo, KellerSegel, RieszGradient,
                      TruncatedRiesz)
from .tabulate import TabulatedKernel

try:
    from . import _pairloop
    HAVE_COMPILED = True
except ImportError:  # extension not built; pure-python path
    _pairloop = None
    HAVE_COMPILED = False


def far_mode_params(tab: TabulatedKernel):
    """Map a table's far-field rule to the compiled loop's inline modes.

    Returns (mode, params) or None when the rule needs the generic path.
    """
    spec = tab.spec
    if spec.is_zero:
        return 0, np.zeros(1)
    if isinstance(spec, BoundedLipschitzDemo):
        cc = 0.5 * bump_second_moment(spec.d) * tab.mollifier.epsilon ** 2
        return 1, np.array([cc, 2.0 * (spec.d + 2), 2.0 * spec.d - 4.0])
    if isinstance(spec, KellerSegel):
        return 2, np.array([-spec.chi, -float(spec.d)])
    if isinstance(spec, RieszGradient):
        c1 = spec.sign_coefficient
        p1 = -(spec.s + 2.0)
        if spec.s == spec.d - 2:
            return 2, np.array([c1, p1])
        cc = 0.5 * bump_second_moment(spec.d) * tab.mollifier.epsilon ** 2
        c2 = c1 * (spec.s + 2.0) * (spec.s + 2.0 - spec.d) * cc
        return 3, np.array([c1, p1, c2, -(spec.s + 4.0)])
    if isinstance(spec, TruncatedRiesz):
        return 0, np.zeros(1)  # table covers the whole cutoff support
    return None


def pair_sum_python(positions, tab: TabulatedKernel, block=256):
    """sum_k W(x_i - x_k) per row, vectorized in blocks (fallback engine).

    Includes the self term, which vanishes for odd kernels (table center
    node is the zero vector).
    """
    x = np.asarray(positions, dtype=float)
    n, d = x.shape
    out = np.zeros_like(x)
    for start in range(0, n, block):
        stop = min(start + block, n)
        z = x[start:stop, None, :] - x[None, :, :]
        flat = z.reshape(-1, d)
        near = np.max(np.abs(flat), axis=1) <= tab.edge
        vals = np.empty_like(flat)
        if np.any(near):
            vals[near] = tab.interp(flat[near])
        if np.any(~near):
            vals[~near] = tab.far_eval(flat[~near])
        out[start:stop] = vals.reshape(stop - start, n, d).sum(axis=1)
    return out


def pair_sum_compiled(positions, tab: TabulatedKernel):
    mode_params = far_mode_params(tab)
    if mode_params is None:
        raise ValueError("no compiled far-field mode for this kernel")
    mode, params = mode_params
    x = np.ascontiguousarray(positions, dtype=float)
    n, d = x.shape
    out = np.zeros_like(x)
    if d == 1:
        table = np.ascontiguousarray(tab.values[:, 0])
        _pairloop.pair_drift_1d(x[:, 0].copy(), table, tab.spacing, tab.edge,
                                mode, params, out[:, 0])
    elif d == 2:
        table = np.ascontiguousarray(tab.values)
        _pairloop.pair_drift_2d(x, table, tab.spacing, tab.edge,
                                mode, params, out)
    else:
        raise ValueError("compiled loop supports d in {1, 2}")
    return out


def supports_compiled(tab: TabulatedKernel):
    return (HAVE_COMPILED and tab.d in (1, 2)
            and far_mode_params(tab) is not None)


def pair_sum(positions, tab: TabulatedKernel, force_python=False):
    """Dispatch to the compiled loop when available, else the numpy path."""
    if not force_python and supports_compiled(tab):
        return pair_sum_compiled(positions, tab)
    return pair_sum_python(positions, tab)


def engine_name():
    return "compiled" if HAVE_COMPILED else "fallback"
