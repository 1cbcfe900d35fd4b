"""Smooth compactly supported bump density and its rescaled family.

The base bump is V(x) = c_d * exp(-1/(1-|x|^2)) on |x| < 1, zero outside,
with c_d fixed by numerical normalization so that V integrates to one.
The rescaled family is V_N(x) = N^(d*alpha) * V(N^alpha * x), a probability
density supported on the ball of radius N^(-alpha).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate


def sphere_area(d):
    """Surface area of the unit sphere S^(d-1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def bump_profile(r):
    """Unnormalized radial profile exp(-1/(1-r^2)) for |r| < 1, else 0.

    Vectorized; overflow-safe at the support edge.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    q = r[inside]
    out[inside] = np.exp(-1.0 / (1.0 - q * q))
    return out


@lru_cache(maxsize=None)
def bump_normalization(d):
    """Normalization constant c_d with c_d * int exp(-1/(1-|x|^2)) dx = 1."""
    val, err = integrate.quad(
        lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)),
        0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    total = sphere_area(d) * val
    if err > 1e-12 * total:
        raise RuntimeError(f"bump normalization quadrature did not converge: err={err}")
    return 1.0 / total


@lru_cache(maxsize=None)
def bump_second_moment(d):
    """Per-coordinate second moment int x_1^2 V(x) dx of the unit bump."""
    val, _ = integrate.quad(
        lambda r: r ** (d + 1) * math.exp(-1.0 / (1.0 - r * r)),
        0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return bump_normalization(d) * sphere_area(d) * val / d


@dataclass(frozen=True)
class MollifierParams:
    """Scaled-bump parameters: V_N(x) = N^(d*alpha) * V(N^alpha x).

    support_radius is the base bump's support (1.0 for the standard bump);
    normalization is c_d for the configured dimension.
    """
    d: int
    alpha: float
    N: int
    support_radius: float = 1.0
    normalization: float = None  # filled from d when None

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0,1], got {self.alpha}")
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.normalization is None:
            object.__setattr__(self, "normalization", bump_normalization(self.d))

    @property
    def scale(self):
        """Spatial scale factor N^alpha."""
        return float(self.N) ** self.alpha

    @property
    def epsilon(self):
        """Support radius of V_N: support_radius * N^(-alpha)."""
        return self.support_radius / self.scale


def standard_mollifier(d, alpha, N):
    return MollifierParams(d=d, alpha=alpha, N=N)


def mollifier_eval(m: MollifierParams, x):
    """Evaluate V_N at points x (shape (..., d) or scalar radius for d=1).

    Returns N^(d*alpha) * V(N^alpha x); zero outside the scaled support.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != m.d:
        if m.d != 1:
            raise ValueError("point dimension does not match mollifier dimension")
        r = np.abs(x)
    else:
        r = np.linalg.norm(x, axis=-1)
    amp = m.normalization * (m.scale / m.support_radius) ** m.d
    return amp * bump_profile(r / m.epsilon)


def mollifier_radial(m: MollifierParams, radii):
    """V_N as a function of |x|, vectorized over radii."""
    r = np.asarray(radii, dtype=float) / m.epsilon
    return m.normalization * (m.scale / m.support_radius) ** m.d * bump_profile(r)


def mollifier_mass_within(m: MollifierParams, radius):
    """Mass of V_N inside the centered ball of the given radius.

    Exact (quadrature) cumulative radial mass; equals 1 for radius >= epsilon.
    """
    if radius <= 0.0:
        return 0.0
    r_base = min(radius / m.epsilon, 1.0)  # in base-bump units
    val, _ = integrate.quad(
        lambda r: r ** (m.d - 1) * math.exp(-1.0 / (1.0 - r * r)) if r < 1.0 else 0.0,
        0.0, r_base, epsabs=1e-13, epsrel=1e-12, limit=200)
    return m.normalization * sphere_area(m.d) * val


def smoothstep(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1, monotone in between."""
    t = np.asarray(t, dtype=float)

    def f(u):
        out = np.zeros_like(u)
        pos = u > 0
        # 1/u overflows for subnormal u; exp(-inf) = 0 is still exact
        with np.errstate(over="ignore"):
            out[pos] = np.exp(-1.0 / u[pos])
        return out

    a = f(1.0 - t)
    b = f(t)
    return a / (a + b + 1e-300)
