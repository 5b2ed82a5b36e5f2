"""Hot elementwise kernels with a numba path and a pure-numpy path.

Set ``MPLCQ_DISABLE_NUMBA=1`` before import to force the numpy path. Both
paths are always importable as ``*_numpy`` / ``*_numba`` so the benchmark
and the tests can compare them directly.
"""

import os

import numpy as np

try:
    from numba import config as _numba_config, njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old for numba; workqueue is always present
        _numba_config.THREADING_LAYER = "workqueue"

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MPLCQ_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def coherent_sum_numpy(forward, backward, weights):
    # sum_m w_m conj(F_m) B_m, accumulated in mode order
    out = np.zeros(forward.shape[1:], dtype=np.complex128)
    for m in range(forward.shape[0]):
        out += weights[m] * (np.conj(forward[m]) * backward[m])
    return out


def apply_phasor_numpy(fields, phasor):
    return fields * phasor[None, :, :]


def multiply_spectrum_numpy(spectra, transfer):
    return spectra * transfer[None, :, :]


def phase_to_phasor_numpy(mask):
    return np.exp(1j * mask)


if HAVE_NUMBA:

    @njit(cache=True, parallel=True, fastmath=False)
    def coherent_sum_numba(forward, backward, weights):
        n, ny, nx = forward.shape
        out = np.zeros((ny, nx), dtype=np.complex128)
        for i in prange(ny):
            for j in range(nx):
                acc = 0j
                for m in range(n):
                    acc += weights[m] * (forward[m, i, j].conjugate() * backward[m, i, j])
                out[i, j] = acc
        return out

    @njit(cache=True, parallel=True)
    def apply_phasor_numba(fields, phasor):
        n, ny, nx = fields.shape
        out = np.empty_like(fields)
        for m in range(n):
            for i in prange(ny):
                for j in range(nx):
                    out[m, i, j] = fields[m, i, j] * phasor[i, j]
        return out

    @njit(cache=True, parallel=True)
    def multiply_spectrum_numba(spectra, transfer):
        n, ny, nx = spectra.shape
        out = np.empty_like(spectra)
        for m in range(n):
            for i in prange(ny):
                for j in range(nx):
                    out[m, i, j] = spectra[m, i, j] * transfer[i, j]
        return out

    @njit(cache=True, parallel=True)
    def phase_to_phasor_numba(mask):
        ny, nx = mask.shape
        out = np.empty((ny, nx), dtype=np.complex128)
        for i in prange(ny):
            for j in range(nx):
                out[i, j] = complex(np.cos(mask[i, j]), np.sin(mask[i, j]))
        return out

else:  # pragma: no cover
    coherent_sum_numba = coherent_sum_numpy
    apply_phasor_numba = apply_phasor_numpy
    multiply_spectrum_numba = multiply_spectrum_numpy
    phase_to_phasor_numba = phase_to_phasor_numpy


# broadcast complex products stay on numpy for both backends: its SIMD loop
# beats the compiled one by about 2x (benchmarks/bench_kernels.py)
apply_phasor = apply_phasor_numpy
multiply_spectrum = multiply_spectrum_numpy
if USE_NUMBA:
    coherent_sum = coherent_sum_numba
    phase_to_phasor = phase_to_phasor_numba
else:
    coherent_sum = coherent_sum_numpy
    phase_to_phasor = phase_to_phasor_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
