import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mplcq.certification import (
    certification_thresholds,
    certified_dimension,
    certify,
    certify_counts,
    certify_from_matrices,
    coherence_pairs_sum,
    fidelity_bound,
)
from mplcq.twophoton import DISTINGUISHABLE, TwoPhotonState, pixel_entangled_state
from mplcq.unitaries import block_diag, dft, haar_random, rng_for


def ideal_tables(d):
    return np.eye(d) / d, np.eye(d) / d


def test_ideal_bell_tables():
    r = certify(*ideal_tables(2), 2)
    assert r.F_bound == pytest.approx(1.0, abs=1e-9)
    assert r.certified_dimension == 2
    assert r.F1 == pytest.approx(0.5)
    assert r.F2_bound == pytest.approx(0.5)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_tight_on_target(d):
    assert certify(*ideal_tables(d), d).F_bound == pytest.approx(1.0, abs=1e-9)
    assert certify(*ideal_tables(d), d).certified_dimension == d


def test_product_state_not_certified():
    p = np.zeros((2, 2))
    p[1, 1] = 1.0
    q = np.full((2, 2), 0.25)
    r = certify(p, q, 2)
    assert r.F_bound <= 0.5 + 1e-12
    assert r.certified_dimension == 1


def test_thresholds():
    assert certification_thresholds(2) == [0, 0.5]
    assert np.allclose(certification_thresholds(3), [0, 1 / 3, 2 / 3])
    assert np.allclose(certification_thresholds(4), [0, 0.25, 0.5, 0.75])
    with pytest.raises(ValueError):
        certification_thresholds(1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.floats(0, 1), st.floats(0, 1))
def test_certified_dimension_monotone(d, a, b):
    lo, hi = sorted((a, b))
    assert certified_dimension(lo, d) <= certified_dimension(hi, d)


def test_strict_threshold():
    assert certified_dimension(2 / 3, 3) == 2
    assert certified_dimension(2 / 3 + 1e-6, 3) == 3


def test_coherence_sum_oracle():
    # brute force over ordered distinct off-diagonal cell pairs with equal difference
    rng = rng_for(4)
    d = 4
    p = rng.random((d, d))
    p /= p.sum()
    cells = [(m, n) for m in range(d) for n in range(d) if m != n]
    brute = sum(
        np.sqrt(p[a] * p[b]) for a in cells for b in cells if a != b and (a[0] - a[1]) % d == (b[0] - b[1]) % d
    )
    assert coherence_pairs_sum(p) == pytest.approx(brute, rel=1e-12)


def test_rejects_bad_tables():
    p, q = ideal_tables(2)
    with pytest.raises(ValueError):
        certify(p * 2, q, 2)
    with pytest.raises(ValueError):
        certify(np.eye(3) / 3, q, 2)


def phi_vector(d):
    v = np.zeros(d * d, dtype=complex)
    v[[j * d + j for j in range(d)]] = 1 / np.sqrt(d)
    return v


def tables_from_rho(rho, d, conjugated=True):
    F = dft(d)
    G = dft(d, conjugated=True) if conjugated else F
    out = []
    for TA, TB in ((np.eye(d), np.eye(d)), (F, G)):
        K = np.kron(TA, TB)
        r = K @ rho @ K.conj().T
        out.append(np.real(np.diag(r)).reshape(d, d))
    return out


def random_rho(d, rng):
    n = d * d
    k = int(rng.integers(1, n + 1))
    G = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = G @ G.conj().T
    rho /= np.trace(rho)
    # pull a fraction of samples towards the target so the bound is exercised
    eps = rng.choice([1.0, rng.random(), rng.random() ** 4])
    phi = phi_vector(d)
    return (1 - eps) * np.outer(phi, phi.conj()) + eps * rho


@pytest.mark.parametrize("d", [2, 3, 4])
def test_soundness_random_states(d):
    rng = rng_for(1000 + d)
    phi = phi_vector(d)
    worst = -np.inf
    for _ in range(1000):
        rho = random_rho(d, rng)
        p, q = tables_from_rho(rho, d)
        p, q = p / p.sum(), q / q.sum()
        fid = float(np.real(phi.conj() @ rho @ phi))
        worst = max(worst, fidelity_bound(p, q, d) - fid)
    assert worst <= 1e-9


@pytest.mark.parametrize("d", [2, 3, 4])
def test_convention_consistency(d):
    rng = rng_for(77)
    for _ in range(20):
        rho = random_rho(d, rng)
        p, qc = tables_from_rho(rho, d, conjugated=True)
        _, qp = tables_from_rho(rho, d, conjugated=False)
        a = certify(p, qc, d, conjugated=True).F_bound
        b = certify(p, qp, d, conjugated=False).F_bound
        assert abs(a - b) < 1e-12


def test_exact_matrices_pipeline():
    for d in (2, 3):
        state = pixel_entangled_state(d)
        T_std = np.eye(2 * d)
        T_mub = block_diag([dft(d), dft(d, conjugated=True)])
        res, P_std, P_mub = certify_from_matrices(d, T_std, T_mub, state)
        assert res.F_bound == pytest.approx(1.0, abs=1e-9)
        assert res.certified_dimension == d


def test_local_unitary_lowers_bound():
    d = 3
    state = pixel_entangled_state(d, statistics=DISTINGUISHABLE)
    scramble = block_diag([np.eye(d), haar_random(d, seed=3)])
    s2 = TwoPhotonState(scramble @ state.coeff @ scramble.T, DISTINGUISHABLE)
    res, _, _ = certify_from_matrices(d, np.eye(2 * d), block_diag([dft(d), dft(d, True)]), s2)
    assert res.F_bound < 0.9


def test_counts_error_bar():
    counts = np.array([[5000, 20], [30, 4950]])
    mub = np.array([[4900, 60], [50, 4990]])
    r = certify_counts(counts, mub, 2, resamples=300, seed=1)
    assert 0.95 < r.F_bound < 1
    assert 0 < r.F_bound_error < 0.02
    again = certify_counts(counts, mub, 2, resamples=300, seed=1)
    assert again.F_bound_error == r.F_bound_error
