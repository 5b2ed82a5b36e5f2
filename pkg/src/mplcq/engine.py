"""Free-space propagation and the multi-plane forward model.

Fields travel as ``(n, ny, nx)`` complex batches internally; the public
single-field functions wrap those batches in :class:`ComplexField`.
Propagation drops the common carrier phase ``exp(i 2 pi z / wavelength)``,
which never affects overlaps between fields propagated the same distance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import _kernels as K
from .optics import ComplexField, Grid, GridMismatchError, ModeSet

TWO_PI = 2 * np.pi
BUNDLE_FORMAT = "mplcq-bundle/1"
_TWO_PI_F32 = np.float32(TWO_PI)

_workers = 1


def set_fft_workers(n):
    global _workers
    _workers = max(1, int(n))


@dataclass(frozen=True)
class MplcGeometry:
    grid: Grid = field(default_factory=Grid)
    wavelength: float = 810e-9
    plane_count: int = 5
    plane_spacing: float = 76e-3
    # last mask -> detection plane
    output_distance: float | None = None

    def __post_init__(self):
        if int(self.plane_count) != self.plane_count or self.plane_count < 1:
            raise ValueError("plane_count must be a positive integer")
        if not self.plane_spacing > 0:
            raise ValueError("plane_spacing must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.output_distance is None:
            object.__setattr__(self, "output_distance", self.plane_spacing)
        elif self.output_distance < 0:
            raise ValueError("output_distance must be non-negative")

    def with_planes(self, plane_count):
        return MplcGeometry(self.grid, self.wavelength, plane_count, self.plane_spacing, self.output_distance)

    def to_dict(self):
        d = asdict(self)
        d["grid"] = asdict(self.grid)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["grid"] = Grid(**d["grid"])
        return cls(**d)


@lru_cache(maxsize=64)
def _transfer(grid, distance, wavelength):
    fx, fy = grid.frequencies()
    f2 = fx[None, :] ** 2 + fy[:, None] ** 2
    inv2 = 1.0 / wavelength**2
    prop = f2 < inv2
    # kz - k written without cancellation
    fz = np.sqrt(np.where(prop, inv2 - f2, 0.0))
    dphase = -TWO_PI * distance * f2 / (1.0 / wavelength + fz)
    H = np.where(prop, np.exp(1j * dphase), 0.0).astype(np.complex128)
    H.setflags(write=False)
    return H


def propagate_batch(fields, grid, distance, wavelength):
    """Angular-spectrum propagation of a ``(n, ny, nx)`` batch.

    Negative distances give the adjoint (back-propagation).
    """
    if distance == 0:
        return fields.copy()
    H = _transfer(grid, float(abs(distance)), float(wavelength))
    if distance < 0:
        H = np.conj(H)
    spec = sfft.fft2(fields, axes=(-2, -1), workers=_workers)
    spec = K.multiply_spectrum(spec, H)
    return sfft.ifft2(spec, axes=(-2, -1), workers=_workers)


def propagate(fld, distance, wavelength):
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if distance == 0:
        return fld
    out = propagate_batch(fld.amplitude[None], fld.grid, distance, wavelength)[0]
    return ComplexField(fld.grid, out)


def apply_mask(fld, mask):
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != fld.grid.shape:
        raise ValueError(f"mask shape {mask.shape} does not match field {fld.grid.shape}")
    return ComplexField(fld.grid, fld.amplitude * K.phase_to_phasor(mask))


def wrap_phase(phase):
    """Wrap to [0, 2pi) and quantize to float32 without producing 2pi."""
    m = np.mod(np.asarray(phase, dtype=np.float64), TWO_PI).astype(np.float32)
    m[m >= _TWO_PI_F32] = 0.0
    return m


class MaskStack:
    """Phase masks of a designed device (float32 radians in [0, 2pi))."""

    def __init__(self, geometry, masks=None, params=None):
        self.geometry = geometry
        shape = (geometry.plane_count,) + geometry.grid.shape
        if masks is None:
            masks = np.zeros(shape, dtype=np.float32)
        masks = np.asarray(masks)
        if masks.shape != shape:
            raise ValueError(f"masks shape {masks.shape} != {shape}")
        if not np.all(np.isfinite(masks)):
            raise ValueError("mask phases must be finite")
        masks = wrap_phase(masks)
        masks.setflags(write=False)
        self.masks = masks
        self.params = dict(params or {})
        self._phasors = None

    @property
    def plane_count(self):
        return self.geometry.plane_count

    @property
    def grid(self):
        return self.geometry.grid

    def phasors(self):
        if self._phasors is None:
            self._phasors = [K.phase_to_phasor(m.astype(np.float64)) for m in self.masks]
        return self._phasors

    def replace_mask(self, index, mask):
        masks = self.masks.copy()
        masks[index] = wrap_phase(mask)
        return MaskStack(self.geometry, masks, self.params)

    def __eq__(self, other):
        return (
            isinstance(other, MaskStack)
            and self.geometry == other.geometry
            and np.array_equal(self.masks, other.masks)
        )

    def save(self, path):
        return save_bundle(self, path)


def _check_batch(fields, grid):
    if fields.shape[-2:] != grid.shape:
        raise GridMismatchError(f"field shape {fields.shape[-2:]} does not match stack grid {grid.shape}")


def forward_batch(fields, stack):
    g = stack.geometry
    _check_batch(fields, g.grid)
    u = np.asarray(fields, dtype=np.complex128)
    ph = stack.phasors()
    for k in range(g.plane_count):
        u = K.apply_phasor(u, ph[k])
        d = g.plane_spacing if k < g.plane_count - 1 else g.output_distance
        u = propagate_batch(u, g.grid, d, g.wavelength)
    return u


def backward_batch(fields, stack):
    """Adjoint of :func:`forward_batch`: output plane back to before mask 1."""
    g = stack.geometry
    _check_batch(fields, g.grid)
    u = np.asarray(fields, dtype=np.complex128)
    ph = stack.phasors()
    for k in range(g.plane_count - 1, -1, -1):
        d = g.plane_spacing if k < g.plane_count - 1 else g.output_distance
        u = propagate_batch(u, g.grid, -d, g.wavelength)
        u = K.apply_phasor(u, np.conj(ph[k]))
    return u


def mplc_forward(fld, stack):
    if fld.grid != stack.grid:
        raise GridMismatchError("input field grid does not match the stack geometry")
    return ComplexField(fld.grid, forward_batch(fld.amplitude[None], stack)[0])


def mplc_backward(fld, stack):
    if fld.grid != stack.grid:
        raise GridMismatchError("field grid does not match the stack geometry")
    return ComplexField(fld.grid, backward_batch(fld.amplitude[None], stack)[0])


@dataclass
class TransferMatrix:
    entries: np.ndarray
    efficiency: float
    unitarity_deviation: float

    @classmethod
    def from_entries(cls, T):
        T = np.asarray(T, dtype=np.complex128)
        n_in = T.shape[1]
        eta = float(np.sum(np.abs(T) ** 2) / n_in)
        G = T.conj().T @ T
        dev = float(np.linalg.norm(G - eta * np.eye(n_in)) / n_in)
        return cls(T, eta, dev)

    @property
    def shape(self):
        return self.entries.shape

    def singular_values(self):
        return np.linalg.svd(self.entries, compute_uv=False)


def overlap_matrix(targets, fields, pitch):
    """``M[i, j] = <targets_i | fields_j>`` for two ``(n, ny, nx)`` batches."""
    a = targets.reshape(targets.shape[0], -1)
    b = fields.reshape(fields.shape[0], -1)
    return (np.conj(a) @ b.T) * pitch**2


def extract_transfer_matrix(stack, inputs, outputs):
    if inputs.grid != stack.grid or outputs.grid != stack.grid:
        raise GridMismatchError("mode sets must live on the stack grid")
    out = forward_batch(inputs.stack(), stack)
    T = overlap_matrix(outputs.stack(), out, stack.grid.pitch)
    return TransferMatrix.from_entries(T)


# .mplc bundle: a directory with meta.json plus plane_XX.f32 (little-endian float32, row-major)


def save_bundle(stack, path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = []
    for k, m in enumerate(stack.masks):
        name = f"plane_{k:02d}.f32"
        (path / name).write_bytes(np.ascontiguousarray(m, dtype="<f4").tobytes(order="C"))
        files.append(name)
    meta = {
        "format": BUNDLE_FORMAT,
        "geometry": stack.geometry.to_dict(),
        "plane_count": stack.plane_count,
        "dtype": "<f4",
        "units": "rad",
        "shape": list(stack.grid.shape),
        "planes": files,
        "params": stack.params,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_bundle(path):
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    if meta.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"unknown bundle format {meta.get('format')!r}")
    geometry = MplcGeometry.from_dict(meta["geometry"])
    shape = tuple(meta["shape"])
    masks = np.stack(
        [np.frombuffer((path / name).read_bytes(), dtype="<f4").reshape(shape) for name in meta["planes"]]
    )
    return MaskStack(geometry, masks, meta.get("params"))
