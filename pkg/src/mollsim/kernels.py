"""Interaction kernel catalog.

Variants: a bounded Lipschitz demo field, power-law gradient kernels
(attractive or repulsive), the planar aggregation kernel -chi*x/|x|^d,
a truncated power-law kernel with a smooth radial cutoff, and a
user-supplied callable.  All built-in variants are odd vector fields of
the form g(|x|) * x/|x|.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bumps import smoothstep


class KernelDomainError(ValueError):
    """Raised when a kernel is evaluated at (or numerically on top of) its singular point."""


def conjugate_exponent(p):
    """Holder conjugate: 1 <-> inf, else p/(p-1)."""
    if p == math.inf:
        return 1.0
    if p == 1.0:
        return math.inf
    return p / (p - 1.0)


@dataclass(frozen=True)
class KernelAssumptions:
    """Integrability/regularity parameters (p, q, r, zeta) used by the rate
    calculator.  For singular variants p is an open upper limit (admissible
    exponents are p' < p), flagged by p_is_upper_limit."""
    p: float
    q: float
    r: float
    zeta: float
    p_is_upper_limit: bool = False

    def __post_init__(self):
        if not (0.0 < self.zeta <= 1.0):
            raise ValueError("zeta must lie in (0, 1]")
        if self.r < max(conjugate_exponent(self.p), conjugate_exponent(self.q)):
            raise ValueError("r must dominate both conjugate exponents")


@dataclass(frozen=True)
class KernelSpec:
    """Base class; concrete variants implement evaluation and metadata."""
    d: int

    # singularity radius: the field is smooth outside this radius
    r_sing: float = field(default=0.0, init=False)
    is_odd: bool = field(default=True, init=False)
    is_singular: bool = field(default=False, init=False)
    is_zero: bool = field(default=False, init=False)

    @property
    def kernel_id(self):
        raise NotImplementedError

    def _eval_impl(self, x, R):
        raise NotImplementedError

    def laplacian(self, x):
        """Componentwise Laplacian of the field where it is smooth, or None."""
        return None

    def far_field_rule(self):
        """Preferred far-field rule name for tabulation."""
        return "extrapolate-smooth"


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if x.shape[-1] != d:
        raise ValueError(f"expected points in R^{d}, got shape {x.shape}")
    pts = np.atleast_2d(x)
    return pts, squeeze


def eval_kernel(spec: KernelSpec, x):
    """Evaluate the raw kernel at x (shape (d,) or (..., d)).

    Raises KernelDomainError at the singular point of a singular variant;
    never returns a non-finite value.
    """
    pts, squeeze = _as_points(x, spec.d)
    R = np.linalg.norm(pts, axis=-1)
    if spec.is_singular and np.any(R == 0.0):
        raise KernelDomainError(f"{spec.kernel_id}: evaluation at the singular point")
    out = spec._eval_impl(pts, R)
    if not np.all(np.isfinite(out)):
        raise KernelDomainError(f"{spec.kernel_id}: non-finite value near the singularity")
    return out[0] if squeeze else out.reshape(np.shape(x))


@dataclass(frozen=True)
class BoundedLipschitzDemo(KernelSpec):
    """Smooth bounded odd field K(x) = -x/(1+|x|^2), unit Lipschitz constant."""

    @property
    def kernel_id(self):
        return f"demo-d{self.d}"

    def _eval_impl(self, x, R):
        return -x / (1.0 + R * R)[..., None]

    def radial_magnitude(self, R):
        # signed magnitude along x/|x|
        return -R / (1.0 + R * R)

    def laplacian(self, x):
        pts, squeeze = _as_points(x, self.d)
        u = np.sum(pts * pts, axis=-1)
        coef = (2.0 * (self.d + 2) + (2.0 * self.d - 4.0) * u) / (1.0 + u) ** 3
        out = pts * coef[..., None]
        return out[0] if squeeze else out.reshape(np.shape(x))


@dataclass(frozen=True)
class RieszGradient(KernelSpec):
    """Power-law gradient kernel +-s*x/|x|^(s+2) for 0 < s <= d-2.

    sign="repulsive" pushes a particle pair apart (+), "attractive" pulls
    it together (-).  The logarithmic endpoint s=0 is not served here; in
    d=2 it coincides with the KellerSegel variant.
    """
    s: float = 1.0
    sign: str = "repulsive"

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("power-law gradient kernels need d >= 2")
        if not (0.0 < self.s <= self.d - 2):
            raise ValueError(f"s must lie in (0, d-2], got s={self.s}, d={self.d}")
        if self.sign not in ("attractive", "repulsive"):
            raise ValueError("sign must be 'attractive' or 'repulsive'")
        object.__setattr__(self, "is_singular", True)

    @property
    def sign_coefficient(self):
        return self.s if self.sign == "repulsive" else -self.s

    @property
    def kernel_id(self):
        return f"riesz-d{self.d}-s{self.s:g}-{self.sign[:3]}"

    def _eval_impl(self, x, R):
        c = self.sign_coefficient
        return c * x * (R ** -(self.s + 2.0))[..., None]

    def radial_magnitude(self, R):
        R = np.asarray(R, dtype=float)
        return self.sign_coefficient * R ** -(self.s + 1.0)

    def laplacian(self, x):
        pts, squeeze = _as_points(x, self.d)
        R = np.linalg.norm(pts, axis=-1)
        beta = self.s + 2.0
        coef = self.sign_coefficient * beta * (beta - self.d) * R ** -(self.s + 4.0)
        out = pts * coef[..., None]
        return out[0] if squeeze else out.reshape(np.shape(x))

    def far_field_rule(self):
        # s = d-2 is the gradient of a potential harmonic away from 0
        return "analytic-equal-to-K" if self.s == self.d - 2 else "extrapolate-smooth"


@dataclass(frozen=True)
class KellerSegel(KernelSpec):
    """Attractive planar aggregation kernel -chi * x/|x|^d, chi > 0."""
    chi: float = 1.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("the aggregation kernel needs d >= 2")
        if self.chi <= 0.0:
            raise ValueError("chi must be positive")
        object.__setattr__(self, "is_singular", True)

    @property
    def kernel_id(self):
        return f"ks-d{self.d}-chi{self.chi:g}"

    def _eval_impl(self, x, R):
        return -self.chi * x * (R ** -float(self.d))[..., None]

    def radial_magnitude(self, R):
        R = np.asarray(R, dtype=float)
        return -self.chi * R ** -(self.d - 1.0)

    def laplacian(self, x):
        pts, squeeze = _as_points(x, self.d)
        out = np.zeros_like(pts)  # harmonic potential away from 0
        return out[0] if squeeze else out.reshape(np.shape(x))

    def far_field_rule(self):
        return "analytic-equal-to-K"


@dataclass(frozen=True)
class TruncatedRiesz(KernelSpec):
    """(x/|x|^alpha_sing) * cut(|x|) with a smooth radial cutoff equal to 1
    on the unit ball and 0 outside radius 2; alpha_sing in (1, 2)."""
    alpha_sing: float = 1.5

    def __post_init__(self):
        if not (1.0 < self.alpha_sing < 2.0):
            raise ValueError("alpha_sing must lie in (1, 2)")
        object.__setattr__(self, "is_singular", True)
        object.__setattr__(self, "r_sing", 0.0)

    @property
    def kernel_id(self):
        return f"trunc-d{self.d}-a{self.alpha_sing:g}"

    @property
    def cutoff_outer_radius(self):
        return 2.0

    def _eval_impl(self, x, R):
        mag = self.radial_magnitude(np.maximum(R, 1e-300)) / np.maximum(R, 1e-300)
        return x * mag[..., None]

    def radial_magnitude(self, R):
        R = np.asarray(R, dtype=float)
        cut = smoothstep(R - 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            mag = R ** (1.0 - self.alpha_sing)
        return np.where(R > 2.0, 0.0, mag * cut)

    def far_field_rule(self):
        # the mollified field vanishes identically beyond the cutoff support
        return "analytic-closed-form"


@dataclass(frozen=True)
class TabulatedCustom(KernelSpec):
    """User-supplied vector field with metadata.

    func maps an (M, d) array of points to (M, d) values; radial_func, when
    given, maps radii to signed magnitudes (field = radial_func(|x|) * x/|x|)
    and enables fast tabulation.
    """
    func: object = None
    name: str = "custom"
    odd: bool = True
    singular: bool = False
    laplacian_func: object = None
    radial_func: object = None
    assumptions: KernelAssumptions = None

    def __post_init__(self):
        object.__setattr__(self, "is_odd", self.odd)
        object.__setattr__(self, "is_singular", self.singular)
        if self.func is None and self.radial_func is None:
            raise ValueError("a callable is required")

    @property
    def kernel_id(self):
        return f"custom-d{self.d}-{self.name}"

    def _eval_impl(self, x, R):
        if self.func is not None:
            return np.asarray(self.func(x), dtype=float)
        mag = np.zeros_like(R)
        nz = R > 0
        mag[nz] = self.radial_func(R[nz]) / R[nz]
        return x * mag[..., None]

    def radial_magnitude(self, R):
        if self.radial_func is None:
            raise NotImplementedError("no radial form declared for this kernel")
        return self.radial_func(np.asarray(R, dtype=float))

    def laplacian(self, x):
        if self.laplacian_func is None:
            return None
        return np.asarray(self.laplacian_func(np.atleast_2d(np.asarray(x, float))))


def zero_kernel(d):
    """All-zeros kernel; the simulation engine skips the pair loop for it."""
    k = TabulatedCustom(d=d, func=lambda x: np.zeros_like(x), name="zero",
                        radial_func=lambda r: np.zeros_like(r))
    object.__setattr__(k, "is_zero", True)
    return k


def assumptions_for(spec: KernelSpec, eps_slack=0.01) -> KernelAssumptions:
    """Integrability parameters feeding the rate calculator.

    Singular variants report r = inf and zeta = 1 - eps_slack; their p is
    the open upper integrability limit (d/(s+1) for power-law gradients and
    the planar kernel, d/(alpha_sing - 1) for the truncated variant).
    """
    if isinstance(spec, BoundedLipschitzDemo):
        return KernelAssumptions(p=math.inf, q=math.inf, r=1.0, zeta=1.0)
    if isinstance(spec, RieszGradient):
        limit = spec.d / (spec.s + 1.0)
        return KernelAssumptions(p=limit, q=math.inf, r=math.inf,
                                 zeta=1.0 - eps_slack, p_is_upper_limit=True)
    if isinstance(spec, KellerSegel):
        limit = spec.d / (spec.d - 1.0)
        return KernelAssumptions(p=limit, q=math.inf, r=math.inf,
                                 zeta=1.0 - eps_slack, p_is_upper_limit=True)
    if isinstance(spec, TruncatedRiesz):
        limit = spec.d / (spec.alpha_sing - 1.0)
        return KernelAssumptions(p=limit, q=math.inf, r=math.inf,
                                 zeta=1.0 - eps_slack, p_is_upper_limit=True)
    if isinstance(spec, TabulatedCustom):
        if spec.assumptions is not None:
            return spec.assumptions
        return KernelAssumptions(p=math.inf, q=math.inf, r=1.0, zeta=1.0)
    raise TypeError(f"unknown kernel spec {type(spec).__name__}")


@dataclass(frozen=True)
class CutoffSpec:
    """Componentwise clamp threshold for the drift."""
    A: float

    def __post_init__(self):
        if self.A <= 0.0:
            raise ValueError("cutoff threshold must be positive")


def cutoff_apply(c: CutoffSpec, v):
    """Clamp every component of v to [-A, A]."""
    return np.clip(v, -c.A, c.A)
