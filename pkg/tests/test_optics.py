import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from mplcq.optics import (
    ClippingError,
    ComplexField,
    Grid,
    GridMismatchError,
    ModeSet,
    ResolutionError,
    gaussian_spot,
    load_cfd,
    overlap,
    save_cfd,
    spot_basis,
    spot_centers,
    superpose,
)
from mplcq.unitaries import dft


@pytest.fixture(scope="module")
def grid():
    return Grid(128, 128, 12.5e-6)


def gaussian_overlap_quadrature(s, w):
    """Normalized overlap of exp(-r^2/w^2) spots displaced by s, by 1D quadrature.

    The 2D integrand factorizes into x and y; the y factor cancels against
    the normalization.
    """
    lim = 12 * w + s
    num, _ = quad(lambda x: np.exp(-(x**2) / w**2) * np.exp(-((x - s) ** 2) / w**2), -lim, lim, points=[0, s / 2, s])
    den, _ = quad(lambda x: np.exp(-2 * x**2 / w**2), -lim, lim)
    return num / den


def test_grid_rejects_odd_or_small():
    with pytest.raises(ValueError):
        Grid(15, 16)
    with pytest.raises(ValueError):
        Grid(8, 8)
    with pytest.raises(ValueError):
        Grid(16, 16, 0.0)


def test_centered_spot_peak_and_power(grid):
    u = gaussian_spot(grid, (0.0, 0.0), 150e-6)
    assert abs(u.power - 1) < 1e-9
    iy, ix = np.unravel_index(np.argmax(np.abs(u.amplitude)), grid.shape)
    assert (iy, ix) == (grid.ny // 2, grid.nx // 2)


@pytest.mark.parametrize("ratio", [2.0, 3.0, 4.0])
def test_displaced_spot_overlap_matches_quadrature(grid, ratio):
    w = 100e-6
    s = ratio * w
    u = gaussian_spot(grid, (-s / 2, 0.0), w)
    v = gaussian_spot(grid, (s / 2, 0.0), w)
    expected = gaussian_overlap_quadrature(s, w)
    assert abs(abs(overlap(u, v)) - expected) < 1e-6
    # closed form for exp(-r^2/w^2) fields
    assert abs(expected - np.exp(-(s**2) / (2 * w**2))) < 1e-9


def test_spot_four_waists_apart(grid):
    w = 100e-6
    u = gaussian_spot(grid, (0.0, -2 * w), w)
    v = gaussian_spot(grid, (0.0, 2 * w), w)
    assert abs(abs(overlap(u, v)) - np.exp(-8)) < 1e-6


def test_clipped_spot_rejected(grid):
    w = 12 * grid.pitch
    edge = grid.extent[1]
    with pytest.raises(ClippingError):
        gaussian_spot(grid, (edge - w, 0.0), w)


def test_underresolved_spot_rejected(grid):
    with pytest.raises(ResolutionError):
        gaussian_spot(grid, (0.0, 0.0), 1.5 * grid.pitch)


def test_overlap_grid_mismatch(grid):
    u = gaussian_spot(grid, waist=100e-6)
    v = gaussian_spot(Grid(128, 128, 10e-6), waist=100e-6)
    with pytest.raises(GridMismatchError):
        overlap(u, v)


def test_self_overlap_is_one(grid):
    u = gaussian_spot(grid, (1e-4, -2e-4), 120e-6)
    assert abs(overlap(u, u) - 1) < 1e-9


def orthonormal_spots(grid, n):
    # 6 waists apart: overlaps ~exp(-18)
    return spot_basis(grid, n, waist=60e-6, spacing=360e-6)


def test_superpose_unit_vector_returns_mode(grid):
    modes = orthonormal_spots(grid, 3)
    out = superpose(modes, [1, 0, 0])
    assert np.array_equal(out.amplitude, modes[0].amplitude)


def test_superpose_dft2_rows_orthogonal(grid):
    modes = orthonormal_spots(grid, 2)
    a = superpose(modes, np.array([1, 1]) / np.sqrt(2))
    b = superpose(modes, np.array([1, -1]) / np.sqrt(2))
    assert abs(overlap(a, b)) < 1e-6


def test_superpose_dft3_row_power(grid):
    modes = orthonormal_spots(grid, 3)
    out = superpose(modes, dft(3)[1])
    power = np.sum(np.abs(out.amplitude) ** 2) * grid.pitch**2
    assert abs(power - 1) < 1e-6


def test_superpose_length_mismatch(grid):
    with pytest.raises(ValueError):
        superpose(orthonormal_spots(grid, 2), [1, 0, 0])


def test_modeset_requires_common_grid(grid):
    u = gaussian_spot(grid, waist=100e-6)
    v = gaussian_spot(Grid(64, 64, 12.5e-6), waist=100e-6)
    with pytest.raises(GridMismatchError):
        ModeSet((u, v))


def test_default_spot_layout_crosstalk():
    g = Grid()
    modes = spot_basis(g, 6)
    assert modes.max_crosstalk() < 1e-3


def test_spot_centers_fill_columns():
    c = spot_centers(6, 1.0, per_column=4)
    # two columns of three, first block in the left column
    assert [x for x, _ in c[:3]] == [-0.5] * 3
    assert [x for x, _ in c[3:]] == [0.5] * 3
    assert c[0][1] > c[1][1] > c[2][1]


def test_cfd_roundtrip(tmp_path, grid):
    rng = np.random.default_rng(3)
    f = ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    p = save_cfd(tmp_path / "f.cfd", f)
    raw = p.read_bytes()
    assert len(raw) == 4 + 4 + 8 + grid.nx * grid.ny * 16
    assert np.frombuffer(raw[:8], "<u4").tolist() == [grid.nx, grid.ny]
    g = load_cfd(p)
    assert g.grid == grid
    assert np.array_equal(g.amplitude, f.amplitude)


def test_cfd_rejects_truncated(tmp_path, grid):
    p = save_cfd(tmp_path / "f.cfd", gaussian_spot(grid, waist=100e-6))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_cfd(p)


_coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=30, deadline=None)
@given(st.lists(_coef, min_size=3, max_size=3), st.lists(_coef, min_size=3, max_size=3), _coef, _coef)
def test_superpose_linear(c1, c2, alpha, beta):
    g = Grid(32, 32, 12.5e-6)
    modes = spot_basis(g, 3, waist=30e-6, spacing=60e-6, per_column=3)
    c1, c2 = np.array(c1), np.array(c2)
    lhs = superpose(modes, alpha * c1 + beta * c2).amplitude
    rhs = alpha * superpose(modes, c1).amplitude + beta * superpose(modes, c2).amplitude
    scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_overlap_hermitian_and_bounded(seed):
    g = Grid(32, 32, 12.5e-6)
    rng = np.random.default_rng(seed)
    u = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)).normalized()
    v = ComplexField(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)).normalized()
    assert abs(overlap(u, v) - np.conj(overlap(v, u))) < 1e-12
    assert abs(overlap(u, v)) <= 1 + 1e-12
