import numpy as np
import pytest

from bandfwi.boundary import mode_index
from bandfwi.helmholtz import RadialLayers
from bandfwi.timedomain import (
    BandSource,
    FrequencyGrid,
    TimeWindow,
    hs_misfit_frequency,
    hs_misfit_time,
    synthesize_trace,
    unit_source,
)


@pytest.fixture(scope="module")
def pair():
    return RadialLayers((0.5,), (1.2,)), RadialLayers((0.5,), (1.35,))


# ---------------------------------------------------------------------------
# grids, windows, sources
# ---------------------------------------------------------------------------


def test_frequency_grid_invariants():
    grid = FrequencyGrid(2.0)
    assert grid.n_nodes == 32
    assert np.allclose(grid.nodes, -grid.nodes[::-1])
    assert np.all(grid.weights > 0)
    assert np.isclose(grid.weights.sum(), 2 * grid.lambda0)


def test_small_lambda0_warns():
    with pytest.warns(UserWarning):
        FrequencyGrid(0.5)


def test_time_window():
    w = TimeWindow(2.0, t0=0.3)
    assert np.isclose(w.length, np.pi / 2.0)
    assert np.isclose(2 * w.half_width, w.length)
    t = np.array([0.3, 0.3 + 0.99 * w.half_width, 0.3 + 1.01 * w.half_width])
    assert np.array_equal(w.weight(t), [1.0, 1.0, 0.0])


def test_band_source_parseval(rng):
    # spectral coefficients vs (2 pi-scaled) time-domain quadrature
    lam0 = 2.0
    coeffs = np.zeros((2, 9), dtype=complex)
    coeffs[0, 0] = 1.0
    coeffs[1, 4] = 0.5 - 0.25j
    src = BandSource(lambda0=lam0, shifts=(0, 3), coeffs=coeffs)
    t = np.linspace(-2500.0, 2500.0, 2 ** 18)
    vals = src.time_values(t)
    energy_time = 2 * np.pi * np.trapezoid(np.sum(np.abs(vals) ** 2, axis=1), t)
    assert abs(energy_time - src.norm**2) < 1e-4 * src.norm**2


def test_band_source_spectrum_band_limited():
    src = unit_source(2.0, 2, shift=1, mode=3)
    lams = np.array([-3.0, -2.0001, 2.0001, 3.0])
    assert np.all(src.spectrum(lams) == 0.0)
    inside = src.spectrum(np.array([0.5]))
    assert abs(inside[0, 3]) == pytest.approx(1.0 / np.sqrt(4.0), rel=1e-12)


# ---------------------------------------------------------------------------
# trace synthesis
# ---------------------------------------------------------------------------


def test_difference_trace_vanishes_for_free_medium(free_medium):
    src = unit_source(2.0, 4, mode=0)
    tr = synthesize_trace(
        free_medium, src, np.linspace(-1, 1, 7), 4, include_free=False
    )
    assert np.max(np.abs(tr.coeffs)) < 1e-14


def test_time_shift_covariance(two_layer):
    lam0 = 2.0
    grid = FrequencyGrid(lam0, 96)
    times = np.linspace(-0.8, 0.8, 5)
    shifted = synthesize_trace(
        two_layer, unit_source(lam0, 4, shift=2, mode=1), times, 4, grid=grid
    )
    base = synthesize_trace(
        two_layer,
        unit_source(lam0, 4, shift=0, mode=1),
        times + 2 * np.pi / lam0,
        4,
        grid=grid,
    )
    scale = np.max(np.abs(base.coeffs))
    assert np.max(np.abs(shifted.coeffs - base.coeffs)) < 1e-9 * scale


def test_bernstein_derivative_bound(two_layer):
    # |d/dt trace| <= lambda0 * max |trace| for band-limited signals
    lam0 = 2.0
    grid = FrequencyGrid(lam0, 128)
    times = np.linspace(-6.0, 6.0, 1500)
    tr = synthesize_trace(two_layer, unit_source(lam0, 2, mode=0), times, 2, grid=grid)
    sig = tr.coeffs[:, 0]
    dt = times[1] - times[0]
    deriv = np.abs(np.gradient(sig, dt))
    assert deriv.max() <= lam0 * np.abs(sig).max() * 1.001


def test_trace_under_resolution_warns(two_layer):
    src = unit_source(2.0, 2, mode=0)
    with pytest.warns(UserWarning, match="under-resolves"):
        synthesize_trace(two_layer, src, [40.0], 2, grid=FrequencyGrid(2.0, 16))


def test_trace_csv(tmp_path, two_layer):
    src = unit_source(1.0, 2, mode=0)
    tr = synthesize_trace(two_layer, src, [0.0, 0.5], 2)
    path = tmp_path / "trace.csv"
    tr.write_csv(path, header_comment="hdr")
    lines = path.read_text().splitlines()
    assert lines[1] == "t,l,m,re,im"
    assert len(lines) == 2 + 2 * 9


# ---------------------------------------------------------------------------
# misfits
# ---------------------------------------------------------------------------


def test_misfit_zero_at_equal_models(two_layer):
    grid = FrequencyGrid(2.0, 24)
    assert hs_misfit_frequency(two_layer, two_layer, grid, 4) == 0.0
    window = TimeWindow(2.0)
    assert hs_misfit_time(two_layer, two_layer, window, 4, 4) == 0.0


def test_misfit_symmetry(pair):
    a, b = pair
    grid = FrequencyGrid(2.0, 32)
    assert np.isclose(
        hs_misfit_frequency(a, b, grid, 6), hs_misfit_frequency(b, a, grid, 6), rtol=1e-13
    )


def test_single_block_misfit(pair):
    # a difference confined to one l block contributes exactly its block term
    from bandfwi.boundary import radial_data_blocks

    a, b = pair
    grid = FrequencyGrid(1.5, 24)
    lmax = 5
    ell = 2
    total = 0.0
    for la, w in zip(grid.nodes, grid.weights):
        d = radial_data_blocks(la, a, lmax) - radial_data_blocks(la, b, lmax)
        total += w * (2 * ell + 1) * abs(d[ell]) ** 2
    total /= 4 * np.pi * grid.lambda0

    full = 0.0
    for la, w in zip(grid.nodes, grid.weights):
        d = radial_data_blocks(la, a, lmax) - radial_data_blocks(la, b, lmax)
        mask = np.zeros(lmax + 1)
        mask[ell] = 1.0
        full += w * np.sum((2 * np.arange(lmax + 1) + 1) * mask * np.abs(d) ** 2)
    full /= 4 * np.pi * grid.lambda0
    assert np.isclose(total, full, rtol=1e-14)


def test_time_misfit_monotone_and_converging(pair):
    a, b = pair
    lam0 = 1.0
    window = TimeWindow(lam0)
    grid = FrequencyGrid(lam0, 48)
    mis_f = hs_misfit_frequency(a, b, grid, 6)
    total, partial = hs_misfit_time(a, b, window, 8, 6, return_partial=True)
    assert np.all(np.diff(partial) >= -1e-18)
    assert partial[-1] == pytest.approx(total)
    assert total <= mis_f
    # converges from below: larger truncation gets closer
    total32 = hs_misfit_time(a, b, window, 32, 6)
    assert total < total32 <= mis_f * (1 + 1e-9)
    assert (mis_f - total32) / mis_f < 0.02


def test_time_misfit_t0_invariance(pair):
    a, b = pair
    lam0 = 1.0
    t_a = hs_misfit_time(a, b, TimeWindow(lam0, t0=0.0), 20, 4)
    t_b = hs_misfit_time(a, b, TimeWindow(lam0, t0=0.3), 20, 4)
    assert abs(t_a - t_b) / t_a < 2e-2


def test_misfit_finite_and_growing_in_lambda0(pair):
    a, b = pair
    vals = []
    for lam0 in (1.0, 2.0, 4.0):
        grid = FrequencyGrid(lam0)
        vals.append(hs_misfit_frequency(a, b, grid, 6))
    assert np.all(np.isfinite(vals))
    assert vals[0] < vals[1] < vals[2]
