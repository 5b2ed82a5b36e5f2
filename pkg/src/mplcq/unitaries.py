"""Target matrices: DFT bases, Haar-random unitaries, direct sums, phase ramps.

Random draws use numpy's PCG64 bit generator. Batch task ``i`` of a run
seeded with ``s`` draws from ``SeedSequence([s, i])``, so batches can be
split across workers without changing any sample.
"""

import json

import numpy as np
import scipy.linalg


def rng_for(seed, task=None):
    entropy = [int(seed)] if task is None else [int(seed), int(task)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def is_unitary(U, tol=1e-12):
    U = np.asarray(U)
    return U.ndim == 2 and U.shape[0] == U.shape[1] and np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) < tol


def dft(N, conjugated=False):
    """Entry (j, m) = omega^(+-j m) / sqrt(N), omega = exp(2 pi i / N), j, m from 0."""
    if N < 2:
        raise ValueError("DFT dimension must be >= 2")
    j = np.arange(N)
    sign = -1 if conjugated else 1
    # reduce the exponent mod N before exponentiating
    return np.exp(sign * 2j * np.pi * (np.outer(j, j) % N) / N) / np.sqrt(N)


def haar_random(N, seed=None, rng=None):
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The diagonal of R is rotated to be real positive, which makes the QR
    factorization unique and the distribution of Q exactly Haar.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if rng is None:
        rng = rng_for(0 if seed is None else seed)
    Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    Q, R = scipy.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))[None, :]


def haar_batch(N, count, seed):
    return [haar_random(N, rng=rng_for(seed, i)) for i in range(count)]


def block_diag(blocks):
    if not blocks:
        raise ValueError("need at least one block")
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=np.complex128) for b in blocks])


def input_phase_ramp(N, phases):
    phases = np.asarray(phases, dtype=np.float64).ravel()
    if phases.size != N:
        raise ValueError(f"{phases.size} phases for {N} modes")
    return np.diag(np.exp(1j * phases))


def to_json(U):
    U = np.asarray(U)
    return json.dumps(
        {"shape": list(U.shape), "entries": [[[float(z.real), float(z.imag)] for z in row] for row in U]},
        indent=1,
    )


def from_json(text):
    d = json.loads(text)
    a = np.array(d["entries"], dtype=np.float64)
    return a[..., 0] + 1j * a[..., 1]
