"""Initial laws: exact i.i.d. sampling plus density evaluation.

Variants: isotropic Gaussian, Gaussian mixture, and a piecewise-constant
density read off a grid field.  Sampling is keyed per particle stream so
the draw for particle i does not depend on the ensemble size.
"""

from dataclasses import dataclass

import numpy as np

from .gaussians import isotropic_gaussian
from .grids import GridField, GridSpec
from .streams import (PURPOSE_MIXTURE, PURPOSE_SAMPLER, init_normals,
                      replica_generator)


@dataclass(frozen=True)
class IsotropicGaussian:
    center: tuple
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")

    def dimension_ok(self, d):
        return len(self.center) == d

    def density(self, x, d):
        return isotropic_gaussian(x, self.center, self.variance, d)

    def sample(self, master_seed, replica, N, d, stream_indices=None):
        z = init_normals(master_seed, replica, N, d, stream_indices)
        return np.asarray(self.center, dtype=float) + np.sqrt(self.variance) * z

    def convolved_with_gc(self, c, t, x, d):
        """Closed form of int g_c(t, x-y) * density(y) dy."""
        return isotropic_gaussian(x, self.center, self.variance + c * t, d)


@dataclass(frozen=True)
class GaussianMixture:
    components: tuple  # of (weight, center, variance)

    def __post_init__(self):
        w = np.array([c[0] for c in self.components], dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")

    def dimension_ok(self, d):
        return all(len(c[1]) == d for c in self.components)

    def density(self, x, d):
        out = 0.0
        for w, center, var in self.components:
            out = out + w * isotropic_gaussian(x, center, var, d)
        return out

    def sample(self, master_seed, replica, N, d, stream_indices=None):
        u = _uniform_rows(master_seed, replica, PURPOSE_MIXTURE, N, 1,
                          stream_indices)[:, 0]
        z = init_normals(master_seed, replica, N, d, stream_indices)
        weights = np.array([c[0] for c in self.components])
        edges = np.cumsum(weights)
        comp = np.searchsorted(edges, u, side="right")
        comp = np.minimum(comp, len(self.components) - 1)
        centers = np.array([c[1] for c in self.components], dtype=float)
        sigmas = np.sqrt(np.array([c[2] for c in self.components], dtype=float))
        return centers[comp] + sigmas[comp, None] * z

    def convolved_with_gc(self, c, t, x, d):
        out = 0.0
        for w, center, var in self.components:
            out = out + w * isotropic_gaussian(x, center, var + c * t, d)
        return out


@dataclass(frozen=True)
class GridFieldSampler:
    """Piecewise-constant density on a grid; exact cell-then-uniform sampling."""
    field: GridField

    def __post_init__(self):
        v = self.field.values
        if np.any(v < 0) or not np.isfinite(v).all():
            raise ValueError("grid density must be nonnegative and finite")
        total = self.field.integral()
        if total <= 0:
            raise ValueError("grid density is not normalizable")
        if abs(total - 1.0) > 1e-10:
            # normalize a valid but unscaled field
            object.__setattr__(self, "field",
                               GridField(self.field.spec, v / total,
                                         self.field.time))

    def dimension_ok(self, d):
        return self.field.spec.d == d

    def density(self, x, d):
        spec = self.field.spec
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.floor((x + spec.L) / spec.spacing + 0.5).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < spec.n), axis=1)
        out = np.zeros(len(x))
        if np.any(inside):
            out[inside] = self.field.values[tuple(idx[inside].T)]
        return out

    def sample(self, master_seed, replica, N, d, stream_indices=None):
        spec = self.field.spec
        u = _uniform_rows(master_seed, replica, PURPOSE_SAMPLER, N, d + 1,
                          stream_indices)
        masses = self.field.values.ravel() * spec.cell_volume
        cdf = np.cumsum(masses)
        cdf /= cdf[-1]
        cells = np.searchsorted(cdf, u[:, 0], side="right")
        cells = np.minimum(cells, masses.size - 1)
        idx = np.stack(np.unravel_index(cells, (spec.n,) * d), axis=-1)
        lo = -spec.L + idx * spec.spacing - 0.5 * spec.spacing
        return lo + spec.spacing * u[:, 1:]

    def convolved_with_gc(self, c, t, x, d):
        # quadrature against the piecewise-constant density
        spec = self.field.spec
        pts = spec.points()
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty(len(x))
        w = self.field.values.ravel() * spec.cell_volume
        var = c * t
        norm = (2.0 * np.pi * var) ** (-d / 2.0)
        for i, xi in enumerate(x):
            r2 = np.sum((pts - xi) ** 2, axis=1)
            out[i] = norm * np.dot(w, np.exp(-0.5 * r2 / var))
        return out


def _uniform_rows(master_seed, replica, purpose, n_rows, cols, stream_indices):
    gen = replica_generator(master_seed, replica, purpose)
    rows = n_rows if stream_indices is None else int(np.max(stream_indices)) + 1
    block = gen.uniform(size=(rows, cols))
    if stream_indices is None:
        return block
    return block[np.asarray(stream_indices, dtype=np.int64)]


def density_on_grid(law, grid: GridSpec) -> GridField:
    """Evaluate the initial density on a grid (normalization reported)."""
    vals = law.density(grid.points(), grid.d).reshape((grid.n,) * grid.d)
    f = GridField(grid, vals, 0.0)
    f.meta["mass_on_box"] = f.integral()
    return f


def check_normalized_on_box(law, grid: GridSpec, tol=1e-10):
    """True when the density integrates to 1 on the box within tol."""
    return abs(density_on_grid(law, grid).integral() - 1.0) <= tol
