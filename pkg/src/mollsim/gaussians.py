"""Gaussian densities g_c(t, x) and closed-form convolutions.

g_c(t, x) is the centered Gaussian with covariance c*t*I_d; c = 2 is the
transition density of the sqrt(2)-noise diffusion.  Convolving g_c(t) with
an isotropic Gaussian of variance v gives another isotropic Gaussian of
variance v + c*t, which keeps the domination and weighting integrals
analytic for Gaussian and mixture initial laws.
"""

import math

import numpy as np


def isotropic_gaussian(x, center, variance, d):
    x = np.asarray(x, dtype=float)
    diff = x - np.asarray(center, dtype=float)
    r2 = np.sum(np.atleast_2d(diff) ** 2, axis=-1) if x.ndim > 1 else float(np.dot(diff, diff))
    norm = (2.0 * math.pi * variance) ** (-d / 2.0)
    return norm * np.exp(-0.5 * r2 / variance)


def gc_density(c, t, x, d):
    """g_c(t, x), centered, covariance c*t*I_d."""
    if c <= 0 or t <= 0:
        raise ValueError("need c > 0 and t > 0")
    return isotropic_gaussian(x, np.zeros(d), c * t, d)


def gc_gradient_norm(c, t, x, d):
    """|grad g_c(t, x)| = (|x|/(c t)) g_c(t, x)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=-1)
    return r / (c * t) * gc_density(c, t, x, d)
