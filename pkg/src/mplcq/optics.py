"""Sampled complex scalar fields, spot bases and inner products."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import ceil, sqrt
from pathlib import Path

import numpy as np

DEFAULT_PITCH = 12.5e-6
DEFAULT_N = 256
DEFAULT_WAIST = 120e-6
DEFAULT_SPACING = 480e-6


class GridMismatchError(ValueError):
    pass


class ResolutionError(ValueError):
    pass


class ClippingError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Square-pixel sampling grid centred on (0, 0).

    Arrays on this grid have shape ``(ny, nx)``; sample ``(ny//2, nx//2)``
    sits at the origin.
    """

    nx: int = DEFAULT_N
    ny: int = DEFAULT_N
    pitch: float = DEFAULT_PITCH

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if int(n) != n or n < 16 or n % 2:
                raise ValueError(f"grid sizes must be even integers >= 16, got {self.nx}x{self.ny}")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def x(self):
        return (np.arange(self.nx) - self.nx // 2) * self.pitch

    @property
    def y(self):
        return (np.arange(self.ny) - self.ny // 2) * self.pitch

    @property
    def extent(self):
        """(xmin, xmax, ymin, ymax) of the sample centres."""
        return (self.x[0], self.x[-1], self.y[0], self.y[-1])

    def coords(self):
        return np.meshgrid(self.x, self.y)

    def frequencies(self):
        """Spatial frequency axes (cycles/m), unshifted FFT order."""
        return np.fft.fftfreq(self.nx, self.pitch), np.fft.fftfreq(self.ny, self.pitch)

    @property
    def nyquist(self):
        return 0.5 / self.pitch


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    amplitude: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitude, dtype=np.complex128, copy=True)
        if a.shape != self.grid.shape:
            raise GridMismatchError(f"amplitude shape {a.shape} does not match grid {self.grid.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitude", a)

    @property
    def power(self):
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.grid.pitch**2)

    def normalized(self):
        p = self.power
        if not p > 0 or not np.isfinite(p):
            raise ValueError("cannot normalize a field with zero or non-finite power")
        return ComplexField(self.grid, self.amplitude / sqrt(p))

    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def __add__(self, other):
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.amplitude + other.amplitude)

    def __mul__(self, scalar):
        return ComplexField(self.grid, self.amplitude * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Ordered, normalized modes sharing one grid."""

    fields: tuple
    labels: tuple = ()
    norm_tol: float = 1e-6

    def __post_init__(self):
        fields = tuple(self.fields)
        if not fields:
            raise ValueError("a ModeSet needs at least one mode")
        grid = fields[0].grid
        for f in fields:
            if f.grid != grid:
                raise GridMismatchError("all modes must share one grid")
            if abs(f.power - 1.0) > self.norm_tol:
                raise ValueError(f"mode power {f.power:.9f} is not normalized")
        labels = tuple(self.labels) or tuple(str(i) for i in range(len(fields)))
        if len(labels) != len(fields):
            raise ValueError("one label per mode")
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]

    def __iter__(self):
        return iter(self.fields)

    @property
    def grid(self):
        return self.fields[0].grid

    def stack(self):
        """(n, ny, nx) complex array of the mode amplitudes."""
        return np.stack([f.amplitude for f in self.fields])

    def gram(self):
        a = self.stack().reshape(len(self), -1)
        return np.conj(a) @ a.T * self.grid.pitch**2

    def max_crosstalk(self):
        g = np.abs(self.gram())
        np.fill_diagonal(g, 0.0)
        return float(g.max()) if len(self) > 1 else 0.0


def _check_same_grid(u, v):
    if u.grid != v.grid:
        raise GridMismatchError("fields live on different grids")


def gaussian_spot(grid, center=(0.0, 0.0), waist=DEFAULT_WAIST):
    """Normalized Gaussian spot ``exp(-r^2 / waist^2)``.

    Raises ResolutionError when ``waist < 2 * pitch`` and ClippingError when
    the ``3 * waist`` support leaves the grid.
    """
    if waist < 2 * grid.pitch:
        raise ResolutionError(f"waist {waist:g} m under-resolved at pitch {grid.pitch:g} m")
    cx, cy = center
    xmin, xmax, ymin, ymax = grid.extent
    r = 3 * waist
    if cx - r < xmin or cx + r > xmax or cy - r < ymin or cy + r > ymax:
        raise ClippingError(f"spot at ({cx:g}, {cy:g}) with waist {waist:g} is clipped by the grid")
    X, Y = grid.coords()
    a = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / waist**2)
    return ComplexField(grid, a).normalized()


def overlap(u, v):
    """Inner product sum(conj(u) * v) * pitch**2."""
    _check_same_grid(u, v)
    return complex(np.vdot(u.amplitude, v.amplitude) * u.grid.pitch**2)


def superpose(modes, coefficients):
    c = np.asarray(coefficients, dtype=np.complex128).ravel()
    if c.size != len(modes):
        raise ValueError(f"{c.size} coefficients for {len(modes)} modes")
    a = np.tensordot(c, modes.stack(), axes=1)
    return ComplexField(modes.grid, a)


def spot_centers(n, spacing=DEFAULT_SPACING, per_column=4):
    """Centres for ``n`` spots on equally spaced columns.

    Spots fill column by column, top to bottom, so a block of consecutive
    modes (one photon's modes) stays together. Columns are ``spacing``
    apart and the whole pattern is centred on the origin.
    """
    if n < 1:
        raise ValueError("need at least one spot")
    ncol = ceil(n / per_column)
    nrow = ceil(n / ncol)
    centers = []
    for k in range(n):
        col, row = divmod(k, nrow)
        x = (col - (ncol - 1) / 2) * spacing
        y = ((nrow - 1) / 2 - row) * spacing
        centers.append((x, y))
    return centers


def spot_basis(grid, n, waist=DEFAULT_WAIST, spacing=DEFAULT_SPACING, per_column=4, labels=None):
    centers = spot_centers(n, spacing, per_column)
    fields = [gaussian_spot(grid, c, waist) for c in centers]
    return ModeSet(tuple(fields), tuple(labels or [f"spot{i + 1}" for i in range(n)]))


# .cfd binary format: <u4 nx, <u4 ny, <f8 pitch, then ny*nx (re, im) <f8 pairs, row-major


def save_cfd(path, fld):
    path = Path(path)
    g = fld.grid
    header = struct.pack("<IId", g.nx, g.ny, g.pitch)
    data = np.empty(g.shape + (2,), dtype="<f8")
    data[..., 0] = fld.amplitude.real
    data[..., 1] = fld.amplitude.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))
    return path


def load_cfd(path):
    raw = Path(path).read_bytes()
    nx, ny, pitch = struct.unpack_from("<IId", raw, 0)
    off = struct.calcsize("<IId")
    expected = off + nx * ny * 16
    if len(raw) != expected:
        raise ValueError(f"truncated or oversized .cfd file: {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(ny, nx, 2)
    return ComplexField(Grid(nx, ny, pitch), data[..., 0] + 1j * data[..., 1])
