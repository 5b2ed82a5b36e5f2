import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mplcq.twophoton import (
    BOSONS,
    DISTINGUISHABLE,
    CoincidenceTable,
    coincidences,
    evolve,
    fit_fringe,
    fringe_visibility,
    map_visibility,
    normalized_rates,
    pixel_entangled_state,
    porter_thomas_test,
    statistical_fidelity,
    TwoPhotonState,
)
from mplcq.unitaries import block_diag, dft, haar_random, input_phase_ramp, rng_for

BS = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_bell_state_coefficients():
    s = pixel_entangled_state(2, statistics=DISTINGUISHABLE)
    c = s.coeff
    assert c[0, 2] == pytest.approx(1 / np.sqrt(2))
    assert c[1, 3] == pytest.approx(1 / np.sqrt(2))
    assert np.count_nonzero(c) == 2


def test_three_term_state():
    c = pixel_entangled_state(3, statistics=DISTINGUISHABLE).coeff
    assert np.allclose([c[0, 3], c[1, 4], c[2, 5]], 1 / np.sqrt(3))


def test_product_state():
    c = pixel_entangled_state(1, statistics=DISTINGUISHABLE).coeff
    assert np.count_nonzero(c) == 1 and c[0, 1] == 1


def test_bosonic_state_symmetric_and_normalized():
    s = pixel_entangled_state(3)
    assert np.array_equal(s.coeff, s.coeff.T)
    assert s.norm2 == pytest.approx(1.0, abs=1e-12)


def test_pairing_validation():
    with pytest.raises(ValueError):
        pixel_entangled_state(2, pairing={0: 2, 1: 2})
    with pytest.raises(ValueError):
        pixel_entangled_state(2, pairing={0: 1, 1: 0})


def test_evolve_identity():
    s = pixel_entangled_state(2)
    assert np.array_equal(evolve(s, np.eye(4)).coeff, s.coeff)


def one_in_each(stats):
    c = np.array([[0, 1], [0, 0]], dtype=complex)
    if stats == BOSONS:
        c = (c + c.T) / np.sqrt(2)
    return TwoPhotonState(c, stats)


def test_hong_ou_mandel():
    out = evolve(one_in_each(BOSONS), BS)
    t = coincidences(out, "all-pairs")
    assert t.get(0, 1) < 1e-30
    assert t.get(0, 0) == pytest.approx(0.5) and t.get(1, 1) == pytest.approx(0.5)


def test_distinguishable_half():
    t = coincidences(evolve(one_in_each(DISTINGUISHABLE), BS), "all-pairs")
    assert t.get(0, 1) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([BOSONS, DISTINGUISHABLE]))
def test_unitary_evolution_preserves_norm(seed, stats):
    s = pixel_entangled_state(2, statistics=stats)
    assert abs(evolve(s, haar_random(4, seed=seed)).norm2 - 1) < 1e-12


def test_lossy_evolution_survival():
    s = pixel_entangled_state(2)
    T = 0.8 * haar_random(4, seed=3)
    out = evolve(s, T)
    assert out.survival <= 1 + 1e-9
    assert out.survival == pytest.approx(0.8**4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_evolve_composes(seed):
    s = pixel_entangled_state(2, phases=[0.0, 0.4])
    T1, T2 = haar_random(4, rng=rng_for(seed, 0)), haar_random(4, rng=rng_for(seed, 1))
    a = evolve(evolve(s, T1), T2).coeff
    b = evolve(s, T2 @ T1).coeff
    assert np.max(np.abs(a - b)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_block_diagonal_statistics_agree(seed):
    TA, TB = haar_random(2, rng=rng_for(seed, 0)), haar_random(2, rng=rng_for(seed, 1))
    T = block_diag([TA, TB])
    tb = coincidences(evolve(pixel_entangled_state(2, statistics=BOSONS), T), "cross-block")
    td = coincidences(evolve(pixel_entangled_state(2, statistics=DISTINGUISHABLE), T), "cross-block")
    assert np.max(np.abs(tb.probs - td.probs)) < 1e-12
    # matrix form |T_A c T_B^T|^2 of the bare pairing matrix
    c = np.eye(2) / np.sqrt(2)
    m = np.abs(TA @ c @ TB.T) ** 2
    assert np.max(np.abs(td.as_matrix() - m / m.sum())) < 1e-12


def test_bell_cross_block_identity():
    t = coincidences(pixel_entangled_state(2), "cross-block")
    assert np.allclose(t.as_matrix(), [[0.5, 0], [0, 0.5]], atol=1e-15)


def test_bell_mub_correlations():
    T = block_diag([dft(2), dft(2, conjugated=True)])
    t = coincidences(evolve(pixel_entangled_state(2), T), "cross-block")
    assert np.allclose(t.as_matrix(), [[0.5, 0], [0, 0.5]], atol=1e-12)


def test_phase_fringe_closed_form():
    T = block_diag([dft(2), dft(2, conjugated=True)])
    for phi in np.linspace(0, 2 * np.pi, 7):
        s = pixel_entangled_state(2, phases=[0, phi])
        t = coincidences(evolve(s, T), "cross-block")
        assert t.as_matrix()[0, 0] / t.as_matrix()[0].sum() == pytest.approx((1 + np.cos(phi)) / 2, abs=1e-12)


def test_ramp_matches_state_phase():
    # phase on the input state equals a diagonal phase on the transformation
    T = block_diag([dft(2), dft(2, conjugated=True)])
    phi = 0.9
    a = coincidences(evolve(pixel_entangled_state(2, phases=[0, phi]), T), "cross-block").probs
    R = input_phase_ramp(4, [0, 0, 0, phi])
    b = coincidences(evolve(pixel_entangled_state(2), T @ R), "cross-block").probs
    assert np.max(np.abs(a - b)) < 1e-12


def test_qutrit_phase_map_structure():
    T = block_diag([dft(3), dft(3, conjugated=True)])
    for p1, p2 in [(0.0, 0.0), (1.0, -0.5), (2.1, 4.0)]:
        t = coincidences(evolve(pixel_entangled_state(3, phases=[0, p1, p2]), T), "cross-block").as_matrix()
        row = t[0] / t[0].sum()
        k = np.arange(3)
        amp = np.abs(1 + np.exp(1j * (p1 - 2 * np.pi * k / 3)) + np.exp(1j * (p2 - 4 * np.pi * k / 3))) ** 2
        assert np.allclose(row, amp / amp.sum(), atol=1e-12)


def test_coincidence_domains():
    s = evolve(pixel_entangled_state(2), haar_random(4, seed=5))
    d = coincidences(s, "distinct")
    a = coincidences(s, "all-pairs")
    assert len(d.pairs) == 6 and len(a.pairs) == 10
    assert d.probs.sum() == pytest.approx(1) and a.probs.sum() == pytest.approx(1)
    assert a.raw_total == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        coincidences(s, "bogus")


def test_table_text_roundtrip(tmp_path):
    s = evolve(pixel_entangled_state(2), haar_random(4, seed=8))
    t = coincidences(s, "cross-block")
    t.save(tmp_path / "t.csv")
    back = CoincidenceTable.load(tmp_path / "t.csv")
    assert back.pairs == t.pairs and back.shape == t.shape
    assert np.array_equal(back.probs, t.probs)


def test_statistical_fidelity_limits():
    s = evolve(pixel_entangled_state(2), haar_random(4, seed=9))
    t = coincidences(s)
    assert statistical_fidelity(t, t) == pytest.approx(1.0, abs=1e-12)
    p = CoincidenceTable([(0, 1), (0, 2)], [1.0, 0.0], "distinct")
    q = CoincidenceTable([(0, 1), (0, 2)], [0.0, 1.0], "distinct")
    assert statistical_fidelity(p, q) == 0.0
    with pytest.raises(ValueError):
        statistical_fidelity(p, coincidences(s))


def test_fringe_exact_and_flat():
    phi = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    assert abs(fringe_visibility(phi, (1 + np.cos(phi)) / 2) - 1) < 1e-6
    assert fringe_visibility(phi, np.full(12, 0.3)) < 1e-12
    fit = fit_fringe(phi, 2 * (1 + 0.5 * np.cos(phi + 0.4)))
    assert fit.visibility == pytest.approx(0.5)
    assert fit.offset_phase == pytest.approx(0.4)
    assert fit.amplitude == pytest.approx(2.0)


def test_fringe_rejects_short_scan():
    with pytest.raises(ValueError):
        fit_fringe(np.linspace(0, 1, 12), np.ones(12))


def test_map_visibility():
    assert map_visibility([0.0, 1.0, 0.5]) == 1.0
    assert map_visibility([2.0, 2.0]) == 0.0


def test_porter_thomas_exponential_passes():
    x = rng_for(1).exponential(size=10_000)
    r = porter_thomas_test(x)
    assert r.ks < 0.02 and r.passed


def test_porter_thomas_point_mass_fails():
    r = porter_thomas_test(np.ones(500))
    assert r.ks == pytest.approx(1 - np.exp(-1), abs=1e-9)
    assert not r.passed


def test_normalized_rates_unit_mean():
    t = coincidences(evolve(pixel_entangled_state(2), haar_random(4, seed=2)))
    assert normalized_rates(t).mean() == pytest.approx(1.0)
