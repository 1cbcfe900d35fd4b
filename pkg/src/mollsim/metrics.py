"""Norms and error functionals for comparing particle output to the
reference density.

Two error notions drive the whole harness: the sup-over-snapshots grid
norm (worst snapshot, each measured in the max of L1 and Lr), and the
Gaussian-weighted pointwise gap between a replica-averaged single
particle marginal and the reference.  Moments over replicas come with
bootstrap intervals because the replica budget is always finite.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussians import gc_density
from .grids import GridField

RECORD_SCHEMA = 1

# cells whose Gaussian weight underflows are excluded, not divided by
WEIGHT_FLOOR = 1e-300


def lp_norm(f: GridField, p) -> float:
    """Cell-volume weighted L^p norm; p = inf gives the node max."""
    if not (p >= 1):
        raise ValueError("p must be >= 1, got %r" % (p,))
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum()) * f.spec.cell_volume
    return float((a ** p).sum() * f.spec.cell_volume) ** (1.0 / p)


def l1_lr_norm(f: GridField, r) -> float:
    """max of the L1 and Lr norms (equivalent to their sum up to a
    factor 2; the max keeps which-term-dominates diagnostics simple)."""
    if r == 1:
        return lp_norm(f, 1)
    return max(lp_norm(f, 1), lp_norm(f, r))


def _check_matched(a: GridField, b: GridField):
    if a.spec != b.spec:
        raise ValueError("grid mismatch: %r vs %r" % (a.spec, b.spec))
    if abs(a.time - b.time) > 1e-9 * max(1.0, abs(a.time)):
        raise ValueError("snapshot time mismatch: %r vs %r"
                         % (a.time, b.time))


def per_snapshot_errors(mu_series, u_series, r):
    if len(mu_series) != len(u_series):
        raise ValueError("series lengths differ: %d vs %d"
                         % (len(mu_series), len(u_series)))
    out = []
    for mu, u in zip(mu_series, u_series):
        _check_matched(mu, u)
        diff = GridField(mu.spec, mu.values - u.values, mu.time)
        out.append(l1_lr_norm(diff, r))
    return out


def sup_time_error(mu_series, u_series, r) -> float:
    """Max over matched snapshots of the L1-and-Lr gap.

    The continuous sup over time is approximated from below by the
    snapshot max; snapshot density is the caller's knob.
    """
    errs = per_snapshot_errors(mu_series, u_series, r)
    if not errs:
        raise ValueError("empty snapshot series")
    return max(errs)


def gaussian_weight_field(u0_law, grid, t: float, c_over_p: float, d: int):
    """(g_{c/p}(t, .) conv u0) evaluated on the grid nodes.

    u0_law may expose convolved_with_gc (closed form) or be a GridField
    (quadrature against its nodes).
    """
    pts = grid.points()
    if hasattr(u0_law, "convolved_with_gc"):
        w = u0_law.convolved_with_gc(c_over_p, t, pts, d)
    elif isinstance(u0_law, GridField):
        src = u0_law.spec.points()
        dens = u0_law.values.ravel()
        w = np.zeros(pts.shape[0])
        # dense quadrature; fine at marginal-study grid sizes
        for j in range(src.shape[0]):
            if dens[j] == 0.0:
                continue
            w += dens[j] * gc_density(c_over_p, t, pts - src[j], d)
        w *= u0_law.spec.cell_volume
    else:
        raise TypeError("u0_law must expose convolved_with_gc or be a "
                        "GridField")
    return np.asarray(w).reshape((grid.n,) * d)


def weighted_marginal_error(estimate: GridField, u: GridField, u0_law,
                            t: float, c: float, p: float,
                            min_count: int = 20) -> float:
    """Max over populated cells of |estimate - u| / weight^(1/p), the
    weight being the initial law smoothed by g_{c/p} at time t.

    estimate.meta['counts'] must carry per-cell replica counts; cells
    under min_count or with underflowing weight are excluded.
    """
    d = estimate.spec.d
    if not (1.0 < p) or (d > 1 and not (p < d / (d - 1.0))):
        raise ValueError("need 1 < p < d/(d-1), got p=%r d=%d" % (p, d))
    if not c > 2:
        raise ValueError("need c > 2, got %r" % (c,))
    _check_matched(estimate, u)
    if "counts" not in estimate.meta:
        raise KeyError("estimate.meta['counts'] is required to gate cells")
    counts = np.asarray(estimate.meta["counts"])
    w = gaussian_weight_field(u0_law, estimate.spec, t, c / p, d)
    denom = np.where(w > 0, w, WEIGHT_FLOOR) ** (1.0 / p)
    ok = (counts >= min_count) & (w > WEIGHT_FLOOR)
    if not ok.any():
        raise ValueError("no cell passes the count/weight gate")
    gap = np.abs(estimate.values - u.values)
    return float((gap / denom)[ok].max())


def moment_over_replicas(errors, m) -> float:
    """(mean of e^m)^(1/m) over replicas."""
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise ValueError("empty error list")
    if not (m >= 1):
        raise ValueError("m must be >= 1")
    if not np.all(np.isfinite(e)) or (e < 0).any():
        raise ValueError("errors must be finite and nonnegative")
    if m == 1:
        return float(e.mean())
    return float((e ** m).mean() ** (1.0 / m))


def bootstrap_moment_interval(errors, m, n_resamples: int = 200,
                              seed: int = 0, level: float = 0.9):
    """Percentile bootstrap interval for moment_over_replicas."""
    e = np.asarray(list(errors), dtype=float)
    point = moment_over_replicas(e, m)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, e.size, size=(n_resamples, e.size))
    res = (e[idx] ** m).mean(axis=1) ** (1.0 / m) if m != 1 \
        else e[idx].mean(axis=1)
    lo, hi = np.quantile(res, [(1 - level) / 2, (1 + level) / 2])
    return point, float(lo), float(hi)


@dataclass
class ErrorRecord:
    """One (N, h, replica) cell of a sweep."""
    N: int
    h: float
    replica: int
    m: int
    sup_time_error: float
    snapshot_errors: list = field(default_factory=list)
    marginal_error: float = None
    runtime_seconds: float = 0.0
    clamp_fraction: float = 0.0

    def __post_init__(self):
        vals = [self.sup_time_error, self.runtime_seconds,
                self.clamp_fraction] + list(self.snapshot_errors)
        if self.marginal_error is not None:
            vals.append(self.marginal_error)
        for v in vals:
            if not (math.isfinite(v) and v >= 0):
                raise ValueError("record entries must be finite and "
                                 "nonnegative, got %r" % (v,))

    def to_json(self) -> dict:
        return {
            "schema": RECORD_SCHEMA,
            "N": self.N, "h": self.h, "replica": self.replica, "m": self.m,
            "sup_time_error": self.sup_time_error,
            "snapshot_errors": list(self.snapshot_errors),
            "marginal_error": self.marginal_error,
            "runtime_seconds": self.runtime_seconds,
            "clamp_fraction": self.clamp_fraction,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ErrorRecord":
        if obj.get("schema") != RECORD_SCHEMA:
            raise ValueError("unsupported record schema %r"
                             % (obj.get("schema"),))
        return cls(N=obj["N"], h=obj["h"], replica=obj["replica"],
                   m=obj["m"], sup_time_error=obj["sup_time_error"],
                   snapshot_errors=list(obj["snapshot_errors"]),
                   marginal_error=obj["marginal_error"],
                   runtime_seconds=obj["runtime_seconds"],
                   clamp_fraction=obj["clamp_fraction"])
