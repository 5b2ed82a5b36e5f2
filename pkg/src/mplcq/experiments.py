"""End-to-end simulated experiments: certification, phase scans, Haar
benchmarks, plane sweeps, mode conversion and efficiency.

Each runner returns plain data (dicts, arrays, tables); persistence lives
in :mod:`mplcq.cli`. ``matrix_level=True`` replaces every designed device
by its exact target matrix.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import certification as cert
from . import twophoton as tp
from .designer import design, single_photon_fidelity
from .engine import extract_transfer_matrix, forward_batch, overlap_matrix
from .fiber import lp_field
from .optics import ComplexField, ModeSet, gaussian_spot, spot_basis, spot_centers
from .unitaries import block_diag, dft, haar_random, input_phase_ramp, rng_for


def spots(cfg, n):
    s = cfg.spots
    return spot_basis(cfg.grid(), n, s.waist, s.spacing, s.per_column)


def mub_target(d, conjugated=True):
    return block_diag([dft(d), dft(d, conjugated=conjugated)])


def task_target(cfg, task=None):
    """Target unitary and mode count for the ``design`` command."""
    e = cfg.experiment
    task = task or e.task
    if task == "identity":
        return np.eye(2 * e.d, dtype=np.complex128)
    if task == "dft":
        return mub_target(e.d, e.conjugated_mub)
    if task == "haar":
        return haar_random(e.modes, rng=rng_for(cfg.seed, 0))
    raise ValueError(f"unknown design task {task!r}")


def design_unitary(cfg, U, plane_count=None, **overrides):
    modes = spots(cfg, U.shape[0])
    opts = replace(cfg.design_options(), **overrides)
    stack, report = design(modes, modes, U, cfg.mplc_geometry(plane_count), opts)
    return stack, report, modes


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- certification and phase scans -------------------------------------------------


def measurement_matrices(cfg, d, matrix_level):
    """(T_std, T_mub) either exact or extracted from designed 5-plane devices."""
    conj = cfg.experiment.conjugated_mub
    I = np.eye(2 * d, dtype=np.complex128)
    M = mub_target(d, conj)
    if matrix_level:
        return I, M, {}
    out = []
    reports = {}
    for name, U in (("standard", I), ("mub", M)):
        stack, report, modes = design_unitary(cfg, U, rebalance=cfg.experiment.mub_rebalance)
        out.append(extract_transfer_matrix(stack, modes, modes).entries)
        reports[name] = (stack, report)
    return out[0], out[1], reports


def run_certification(cfg, d=None, matrix_level=False, matrices=None):
    d = d or cfg.experiment.d
    if matrices is None:
        T_std, T_mub, reports = measurement_matrices(cfg, d, matrix_level)
    else:
        (T_std, T_mub), reports = matrices, {}
    state = tp.pixel_entangled_state(d, statistics=cfg.experiment.statistics)
    res, P_std, P_mub = cert.certify_from_matrices(d, T_std, T_mub, state, cfg.experiment.conjugated_mub)
    res.digest["optics"] = "matrix-level" if matrix_level else "designed stacks"
    return {"result": res, "P_std": P_std, "P_mub": P_mub, "reports": reports, "T_std": T_std, "T_mub": T_mub}


@dataclass
class PhaseScan:
    d: int
    phases: np.ndarray
    # rates[..., k]: post-selected probability of pair (A0, B_k) at each scan point
    rates: np.ndarray
    visibilities: np.ndarray

    @property
    def mean_visibility(self):
        return float(np.mean(self.visibilities))


def _scan_rates(d, T_mub, phase_vectors, statistics, conjugated):
    A, B = range(d), range(d, 2 * d)
    rates = []
    for ph in phase_vectors:
        state = tp.pixel_entangled_state(d, phases=ph, statistics=statistics)
        table = tp.coincidences(tp.evolve(state, T_mub), "cross-block", A, B)
        rates.append(table.as_matrix()[0])
    return np.array(rates)


def run_phase_scan(cfg, d=None, matrix_level=False, T_mub=None, samples=None):
    """Scan the input phase(s) and measure fringe visibility in the MUB.

    The phase rides on the input spot of A mode 1 (d=2) or A modes 1 and 2
    (d=3, 2D scan). Spots are disjoint at the first mask, so an input piston
    is the column rescaling ``T diag(exp(i phi))``; the state carries it.
    """
    e = cfg.experiment
    d = d or e.d
    n = samples or e.scan_samples
    if T_mub is None:
        _, T_mub, _ = measurement_matrices_mub_only(cfg, d, matrix_level)
    phi = 2 * np.pi * np.arange(n) / n
    if d == 2:
        vecs = [np.array([0.0, p]) for p in phi]
        rates = _scan_rates(d, T_mub, vecs, e.statistics, e.conjugated_mub)
        vis = np.array([tp.fringe_visibility(phi, rates[:, k]) for k in range(d)])
        return PhaseScan(d, phi, rates, vis)
    grid = [(p1, p2) for p1 in phi for p2 in phi]
    vecs = [np.concatenate([[0.0, p1, p2], np.zeros(d - 3)]) for p1, p2 in grid]
    rates = _scan_rates(d, T_mub, vecs, e.statistics, e.conjugated_mub).reshape(n, n, d)
    vis = np.array([tp.map_visibility(rates[:, :, k]) for k in range(d)])
    return PhaseScan(d, phi, rates, vis)


def measurement_matrices_mub_only(cfg, d, matrix_level):
    M = mub_target(d, cfg.experiment.conjugated_mub)
    if matrix_level:
        return None, M, {}
    stack, report, modes = design_unitary(cfg, M, rebalance=cfg.experiment.mub_rebalance)
    return None, extract_transfer_matrix(stack, modes, modes).entries, {"mub": (stack, report)}


# --- Haar benchmarks ---------------------------------------------------------------


def haar_state(modes, statistics):
    half = modes // 2
    return tp.pixel_entangled_state(half, {p: half + p for p in range(half)}, statistics=statistics)


@dataclass
class HaarItem:
    index: int
    fidelity: float
    efficiency: float
    single_photon_fidelity: float
    rates: np.ndarray
    ideal_rates: np.ndarray


def _haar_item(args):
    cfg, index, plane_count, matrix_level = args
    e = cfg.experiment
    U = haar_random(e.modes, rng=rng_for(cfg.seed, index))
    state = haar_state(e.modes, e.statistics)
    if matrix_level:
        T, eta = U, 1.0
    else:
        stack, _, modes = design_unitary(cfg, U, plane_count)
        tm = extract_transfer_matrix(stack, modes, modes)
        T, eta = tm.entries, tm.efficiency
    P_th = tp.coincidences(tp.evolve(state, U), e.domain)
    P_ex = tp.coincidences(tp.evolve(state, T), e.domain)
    return HaarItem(
        index,
        tp.statistical_fidelity(P_ex, P_th),
        float(eta),
        single_photon_fidelity(T, U),
        tp.normalized_rates(P_ex),
        tp.normalized_rates(P_th),
    )


def run_haar_batch(cfg, count=None, plane_count=None, matrix_level=False, threads=1, start=0):
    count = count or cfg.experiment.haar_count
    items = [(cfg, start + i, plane_count, matrix_level) for i in range(count)]
    return _map(_haar_item, items, threads)


def summarize_haar(items, pt_threshold=0.1):
    fs = np.array([it.fidelity for it in items])
    eta = np.array([it.efficiency for it in items])
    pooled = np.concatenate([it.rates for it in items])
    pt = tp.porter_thomas_test(pooled, pt_threshold) if pooled.size >= 100 else None
    return {
        "count": len(items),
        "mean_fidelity": float(fs.mean()),
        "std_fidelity": float(fs.std(ddof=1)) if len(fs) > 1 else 0.0,
        "mean_efficiency": float(eta.mean()),
        "std_efficiency": float(eta.std(ddof=1)) if len(eta) > 1 else 0.0,
        "max_efficiency": float(eta.max()),
        "porter_thomas_ks": None if pt is None else pt.ks,
        "porter_thomas_pass": None if pt is None else bool(pt.passed),
        "pooled_samples": int(pooled.size),
    }


def run_planes_sweep(cfg, planes=None, samples=None, matrix_level=False, threads=1):
    e = cfg.experiment
    planes = planes or e.planes
    samples = samples or e.samples_per_point
    rows = []
    for P in planes:
        items = run_haar_batch(cfg, samples, P, matrix_level, threads)
        fs = np.array([it.fidelity for it in items])
        rows.append((int(P), float(fs.mean()), float(fs.std(ddof=1)) if len(fs) > 1 else 0.0, len(fs)))
    return rows


# --- mode conversion ---------------------------------------------------------------


def conversion_modes(cfg):
    """Inputs: 4 spots (A1, A2, B1, B2). Outputs: A spots in place, LP01/LP11 at the B centroid."""
    s = cfg.spots
    g = cfg.grid()
    centers = spot_centers(4, s.spacing, s.per_column)
    inputs = ModeSet(tuple(gaussian_spot(g, c, s.waist) for c in centers), ("A1", "A2", "B1", "B2"))
    bx = 0.5 * (centers[2][0] + centers[3][0])
    by = 0.5 * (centers[2][1] + centers[3][1])
    spec = cfg.fiber_spec()
    lp01 = lp_field(spec, 0, 1, grid=g, center=(bx, by))
    lp11 = lp_field(spec, 1, 1, cfg.fiber.lp11_orientation, grid=g, center=(bx, by))
    outputs = ModeSet((inputs[0], inputs[1], lp01, lp11), ("A1", "A2", "LP01", "LP11"))
    return inputs, outputs


def run_mode_conversion(cfg, matrix_level=False):
    inputs, outputs = conversion_modes(cfg)
    U = np.eye(4, dtype=np.complex128)
    state = tp.pixel_entangled_state(2, statistics=cfg.experiment.statistics)
    if matrix_level:
        T = U
        out = np.tensordot(U.T, outputs.stack(), axes=1)
        report, stack = None, None
    else:
        stack, report = design(inputs, outputs, U, cfg.mplc_geometry(), cfg.design_options())
        out = forward_batch(inputs.stack(), stack)
        T = overlap_matrix(outputs.stack(), out, cfg.grid().pitch)
    fid = np.abs(np.diagonal(T)) ** 2
    c = tp.evolve(state, T).coeff
    cond = {}
    fields = {}
    for a, name in ((0, "A1"), (1, "A2")):
        amps = c[a, 2:4] + c[2:4, a]
        pw = np.abs(amps) ** 2
        frac = pw / pw.sum()
        cond[name] = {"LP01": float(frac[0]), "LP11": float(frac[1])}
        # photon B's field conditioned on photon A in output spot a
        w = c[a, :] + c[:, a]
        fields[name] = ComplexField(cfg.grid(), np.tensordot(w, out, axes=1))
    crosstalk = max(cond["A1"]["LP11"], cond["A2"]["LP01"])
    return {
        "overlap_fidelities": {lab: float(f) for lab, f in zip(outputs.labels, fid)},
        "conditional": cond,
        "crosstalk": float(crosstalk),
        "fields": fields,
        "report": report,
        "stack": stack,
    }
