"""Wavefront-matching design of phase-mask stacks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import _kernels as K
from .engine import (
    MaskStack,
    TransferMatrix,
    backward_batch,
    forward_batch,
    overlap_matrix,
    propagate_batch,
    wrap_phase,
)
from .optics import GridMismatchError


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignOptions:
    iterations: int = 30
    min_iterations: int = 20
    angle_fraction: float = 0.25
    mode_weights: tuple | None = None
    convergence_tolerance: float = 1e-5
    # True: match each mode up to its own output phase (pistons fixed afterwards)
    phase_free: bool = True
    # smallest dark-region floor, relative to the peak of the filtered overlap field
    dark_floor: float = 1e-3
    # spectral energy of exp(i*mask) required inside the pass band; the floor
    # is raised per update until it is met. Off by default: enforcing it costs
    # conversion efficiency (see README)
    band_target: float = 0.0
    # per-iteration step (0 disables) pulling each mode's output power split
    # towards |target|^2; plain matching trades balance for efficiency
    rebalance: float = 0.0
    max_modes: int = 16
    correct_phases: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.angle_fraction <= 1:
            raise ValueError("angle_fraction must lie in (0, 1]")
        if self.mode_weights is not None and any(w <= 0 for w in self.mode_weights):
            raise ValueError("mode weights must be positive")
        if not 0 <= self.band_target < 1:
            raise ValueError("band_target must lie in [0, 1)")
        if not 0 <= self.rebalance <= 1:
            raise ValueError("rebalance must lie in [0, 1]")
        if self.dark_floor < 0:
            raise ValueError("dark_floor must be >= 0")

    def to_dict(self):
        d = asdict(self)
        if d["mode_weights"] is not None:
            d["mode_weights"] = list(d["mode_weights"])
        return d


@dataclass
class DesignReport:
    fidelity_trace: list
    mode_fidelities: list
    statistical_fidelity: float
    matrix_fidelity: float
    efficiency: float
    iterations_run: int

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json())
        return Path(path)


def lowpass_window(grid, angle_fraction):
    """Circular pass band of radius ``angle_fraction * Nyquist`` (FFT order)."""
    fx, fy = grid.frequencies()
    r2 = fx[None, :] ** 2 + fy[:, None] ** 2
    return r2 <= (angle_fraction * grid.nyquist) ** 2


def mask_update(plane_index, forward_fields, backward_fields, options, grid=None, window=None):
    """New phase for one plane from the fields meeting there.

    ``forward_fields`` arrive just before the mask, ``backward_fields`` are
    the adjoint-propagated targets just after it. The mask is the phase of
    the weighted coherent overlap, low-passed to the allowed angular band
    first; dark pixels fall back to zero phase.
    """
    forward_fields = np.asarray(forward_fields)
    backward_fields = np.asarray(backward_fields)
    if forward_fields.shape != backward_fields.shape:
        raise ValueError(
            f"plane {plane_index}: {forward_fields.shape[0]} forward vs {backward_fields.shape[0]} backward fields"
        )
    n = forward_fields.shape[0]
    w = np.ones(n) if options.mode_weights is None else np.asarray(options.mode_weights, dtype=np.float64)
    if w.size != n:
        raise ValueError("one weight per mode")
    acc = K.coherent_sum(
        np.ascontiguousarray(forward_fields, dtype=np.complex128),
        np.ascontiguousarray(backward_fields, dtype=np.complex128),
        w,
    )
    if window is None and grid is not None:
        window = lowpass_window(grid, options.angle_fraction)
    if window is not None:
        acc = sfft.ifft2(sfft.fft2(acc) * window)
    peak = np.abs(acc).max()
    if peak == 0:
        return np.zeros(acc.shape, dtype=np.float32)
    floor = options.dark_floor
    phase = np.angle(acc + floor * peak)
    if window is not None and options.band_target > 0:
        # a phase with dim-region vortices spills far outside the band; a
        # larger real offset flattens the dim regions first
        while band_fraction(phase, window) < options.band_target and floor < 1:
            floor = max(2 * floor, 1e-3)
            phase = np.angle(acc + floor * peak)
    return wrap_phase(phase)


def band_fraction(phase, window):
    """Share of the spectral energy of ``exp(i*phase)`` inside ``window``."""
    S = np.abs(sfft.fft2(np.exp(1j * np.asarray(phase, dtype=np.float64)))) ** 2
    return float(S[window].sum() / S.sum())


def _rebalanced(C, U, T, rate):
    # nudge target magnitudes so each column's output power split tends to |U|^2
    want = np.abs(U) ** 2
    got = np.abs(T) ** 2
    got = got / np.maximum(got.sum(axis=0, keepdims=True), 1e-300)
    ratio = np.where(want > 0, want / np.maximum(got, 1e-12), 1.0)
    mag = np.abs(C) * np.clip(ratio, 0.25, 4.0) ** (rate / 2)
    C = np.exp(1j * np.angle(U)) * mag
    return C / np.linalg.norm(C, axis=0, keepdims=True)


def _targets(outputs, target):
    # column j of the target unitary spreads input j over the output modes
    return np.tensordot(target.T, outputs.stack(), axes=1)


def _check(inputs, outputs, target, geometry, options):
    n = len(inputs)
    if len(outputs) != n:
        raise DesignError(f"{n} input modes but {len(outputs)} output modes")
    if n > options.max_modes:
        raise DesignError(f"{n} modes exceeds the capacity bound of {options.max_modes}")
    if inputs.grid != geometry.grid or outputs.grid != geometry.grid:
        raise GridMismatchError("mode sets must live on the geometry grid")
    U = np.asarray(target, dtype=np.complex128)
    if U.shape != (n, n):
        raise DesignError(f"target is {U.shape}, expected {(n, n)}")
    if np.linalg.norm(U.conj().T @ U - np.eye(n)) >= 1e-9:
        raise DesignError("target matrix is not unitary")
    return U


def _current_overlaps(B, phasor, F, pitch):
    # <B_m | e^{i phi} F_m> per mode
    return np.einsum("mij,mij->m", np.conj(B), F * phasor[None]) * pitch**2


def design(inputs, outputs, target, geometry, options=None):
    """Design a stack mapping ``inputs[j]`` to ``sum_k target[k, j] outputs[k]``.

    Returns ``(stack, report)``. Masks start flat, each iteration sweeps the
    planes first-to-last then last-to-first.
    """
    options = options or DesignOptions()
    U = _check(inputs, outputs, target, geometry, options)
    grid = geometry.grid
    n = len(inputs)
    P = geometry.plane_count
    lam = geometry.wavelength
    d = [geometry.plane_spacing] * (P - 1) + [geometry.output_distance]
    window = lowpass_window(grid, options.angle_fraction)
    w = np.ones(n) if options.mode_weights is None else np.asarray(options.mode_weights, dtype=np.float64)

    X = inputs.stack()
    O = outputs.stack()
    Y = _targets(outputs, U)
    # effective target coefficients; differ from U only when rebalancing
    C = U.copy()
    masks = np.zeros((P,) + grid.shape, dtype=np.float32)
    phasors = [np.ones(grid.shape, dtype=np.complex128) for _ in range(P)]

    def update(k, F, Ob):
        B = np.tensordot(C.T, Ob, axes=1)
        if options.phase_free:
            ov = _current_overlaps(B, phasors[k], F, grid.pitch)
            B = B * np.exp(1j * np.angle(ov))[:, None, None]
        m = mask_update(k, F, B, options, window=window)
        masks[k] = m
        phasors[k] = K.phase_to_phasor(m.astype(np.float64))

    # the output modes themselves are propagated backwards; any target is a
    # linear combination of them, and their overlaps give the full matrix
    def backward_sweep(on_plane):
        b = propagate_batch(O, grid, -d[P - 1], lam)
        for k in range(P - 1, -1, -1):
            on_plane(k, b)
            Oc[k] = b
            if k > 0:
                b = propagate_batch(K.apply_phasor(b, np.conj(phasors[k])), grid, -d[k - 1], lam)

    Oc = [None] * P
    backward_sweep(lambda k, b: None)

    trace = []
    Fc = [None] * P
    prev = -np.inf
    it = 0
    for it in range(1, options.iterations + 1):
        f = X
        for k in range(P):
            Fc[k] = f
            update(k, f, Oc[k])
            f = propagate_batch(K.apply_phasor(f, phasors[k]), grid, d[k], lam)
        backward_sweep(lambda k, b: update(k, Fc[k], b))
        T = np.einsum("kij,mij->km", np.conj(Oc[0]), X * phasors[0][None]) * grid.pitch**2
        ov = np.sum(np.conj(U) * T, axis=0)
        fid = float(np.average(np.abs(ov) ** 2, weights=w))
        trace.append(fid)
        if options.rebalance > 0:
            C = _rebalanced(C, U, T, options.rebalance)
        if it >= options.min_iterations and fid - prev < options.convergence_tolerance:
            break
        prev = fid

    params = {"designer": "wavefront-matching", "options": options.to_dict(), "target": _matrix_to_list(U)}
    stack = MaskStack(geometry, masks, params)
    if options.correct_phases:
        # C carries U's phases; passing it keeps the first-plane re-update on
        # the same (possibly rebalanced) targets the sweeps converged to
        stack = correct_global_phases(stack, inputs, outputs, C, options=options)
    report = _report(stack, X, Y, outputs, U, trace, it)
    return stack, report


def _matrix_to_list(U):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(U)]


def single_photon_fidelity(T, U):
    """Mean column-wise Bhattacharyya overlap of |T|^2 and |U|^2."""
    p = np.abs(T) ** 2
    p = p / p.sum(axis=0, keepdims=True)
    q = np.abs(U) ** 2
    return float(np.mean(np.sum(np.sqrt(p * q), axis=0)))


def matrix_fidelity(T, U):
    """|Tr(U^dag T)|^2 / (n Tr(T^dag T)): phase-sensitive, loss-normalized."""
    n = U.shape[0]
    num = abs(np.trace(U.conj().T @ T)) ** 2
    den = n * np.real(np.trace(T.conj().T @ T))
    return float(num / den) if den > 0 else 0.0


def _report(stack, X, Y, outputs, U, trace, it):
    out = forward_batch(X, stack)
    pitch = stack.grid.pitch
    mode_fid = np.abs(np.einsum("mij,mij->m", np.conj(Y), out) * pitch**2) ** 2
    T = overlap_matrix(outputs.stack(), out, pitch)
    tm = TransferMatrix.from_entries(T)
    return DesignReport(
        fidelity_trace=[float(x) for x in trace],
        mode_fidelities=[float(x) for x in mode_fid],
        statistical_fidelity=single_photon_fidelity(T, U),
        matrix_fidelity=matrix_fidelity(T, U),
        efficiency=tm.efficiency,
        iterations_run=int(it),
    )


def correct_global_phases(stack, inputs, outputs, target, crosstalk_tol=1e-3, options=None, rounds=4):
    """Piston each input spot on the first mask so column phases match ``target``.

    The piston enters through the first-plane update: mode j's backward
    field joins the coherent sum with an extra phase ``alpha_j``. Inputs are
    disjoint on the first plane, so the change lands on spot j's support and
    obeys the same pass band and dark floor as every other mask. A few
    measure-and-correct rounds absorb the small coupling between spots.
    """
    if inputs.max_crosstalk() > crosstalk_tol:
        raise DesignError("input modes overlap; cannot piston them independently")
    if options is None:
        opts = dict(stack.params.get("options", {}))
        if opts.get("mode_weights") is not None:
            opts["mode_weights"] = tuple(opts["mode_weights"])
        options = DesignOptions(**opts)
    U = np.asarray(target, dtype=np.complex128)
    grid = stack.grid
    X = inputs.stack()
    Yout = outputs.stack()
    window = lowpass_window(grid, options.angle_fraction)
    B = None
    for _ in range(rounds):
        T = overlap_matrix(Yout, forward_batch(X, stack), grid.pitch)
        # alpha_j maximizes Re sum_i conj(U_ij) T_ij e^{i alpha_j}
        alpha = np.angle(np.sum(U * np.conj(T), axis=0))
        if np.all(np.abs(alpha) < 1e-12):
            break
        if B is None:
            # targets just after mask 1; independent of mask 1 itself
            phasor0 = stack.phasors()[0]
            B = backward_batch(_targets(outputs, U), stack) * phasor0[None]
            gamma = np.angle(_current_overlaps(B, phasor0, X, grid.pitch))
        gamma = gamma + alpha
        m0 = mask_update(0, X, B * np.exp(1j * gamma)[:, None, None], options, window=window)
        stack = stack.replace_mask(0, m0)
    return stack
