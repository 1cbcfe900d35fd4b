"""Regular box grids and grid functions.

A grid covers the box [-L, L)^d with n nodes per axis at spacing 2L/n
(the right edge is the periodic image of the left).  The same layout
serves the spectral solver, the deposited particle densities, and the
replica histograms; integrals are node sums times the cell volume.
"""

import io
import os
import struct
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d < 1 or self.n < 2 or self.L <= 0:
            raise ValueError("invalid grid")

    @property
    def spacing(self):
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self):
        return self.spacing ** self.d

    def axis(self):
        return -self.L + self.spacing * np.arange(self.n)

    def mesh(self):
        axes = [self.axis()] * self.d
        return np.meshgrid(*axes, indexing="ij")

    def points(self):
        """All nodes as an (n^d, d) array."""
        return np.stack([g.ravel() for g in self.mesh()], axis=-1)

    def wavenumbers(self):
        """Angular wavenumbers per axis (fft layout)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)


@dataclass
class GridField:
    """Scalar field sampled on a GridSpec, with a time stamp."""
    spec: GridSpec
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.n,) * self.spec.d:
            raise ValueError(f"field shape {self.values.shape} does not match "
                             f"grid ({self.spec.n},)*{self.spec.d}")

    def integral(self):
        return float(np.sum(self.values)) * self.spec.cell_volume

    def copy(self):
        return GridField(self.spec, self.values.copy(), self.time,
                         dict(self.meta))


def write_field(path_or_file, f: GridField):
    """Serialize as header (d u32, n u32, L f64, time f64) + row-major f64."""
    own = isinstance(path_or_file, (str, bytes, os.PathLike))
    fh = open(path_or_file, "wb") if own else path_or_file
    try:
        fh.write(struct.pack("<IIdd", f.spec.d, f.spec.n, f.spec.L, f.time))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    finally:
        if own:
            fh.close()


def read_field(path_or_file) -> GridField:
    own = isinstance(path_or_file, (str, bytes, os.PathLike))
    fh = open(path_or_file, "rb") if own else path_or_file
    try:
        d, n, L, time = struct.unpack("<IIdd", fh.read(24))
        count = n ** d
        values = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape((n,) * d)
        return GridField(GridSpec(d=int(d), L=float(L), n=int(n)),
                         values.copy(), float(time))
    finally:
        if own:
            fh.close()


def field_to_bytes(f: GridField) -> bytes:
    buf = io.BytesIO()
    write_field(buf, f)
    return buf.getvalue()
