import warnings

import numpy as np
import pytest
from scipy import stats

from mopasim.schmidt import SchmidtDecomposition, assemble_2d
from mopasim.tomography import (
    covariance_from_rows,
    covariance_slice,
    fidelities,
    fit_quadratic_gauge,
    frame_rng,
    nodal_lines,
    reconstruct_modes,
    remove_gauge,
    simulate_frames,
)


@pytest.fixture(scope="module")
def mopa_spec(decomps):
    return assemble_2d(decomps["mopa"], 12)


def test_frame_rng_is_counter_based():
    a = frame_rng(7, 3).standard_normal(4)
    b = frame_rng(7, 3).standard_normal(4)
    c = frame_rng(7, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_frames_independent_of_ensemble_size(mopa_spec):
    small = simulate_frames(mopa_spec, 10, seed=3)
    big = simulate_frames(mopa_spec, 20, seed=3)
    np.testing.assert_array_equal(small.coefficients, big.coefficients[:10])
    np.testing.assert_array_equal(small.frame(4), big.frame(4))


def test_row_slices_match_full_frames(mopa_spec):
    ens = simulate_frames(mopa_spec, 4, seed=1)
    y = ens.grid.n_points // 2 + 5
    rows = ens.row_slices(y)
    for i in range(4):
        np.testing.assert_allclose(rows[i], ens.frame(i)[:, y], rtol=1e-12, atol=1e-300)
    noisy = simulate_frames(mopa_spec, 3, seed=1, noise_std=1e-3)
    np.testing.assert_allclose(noisy.row_slices(y)[2], noisy.frame(2)[:, y], rtol=1e-12)


def test_single_mode_intensity_is_exponential(decomps):
    spec = assemble_2d(decomps["squeezer"], 0)
    ens = simulate_frames(spec, 4000, seed=11)
    h = ens.grid.n_points // 2
    samples = ens.row_slices(h)[:, h]
    mean = np.sinh(spec.gain_matrix[0, 0]) ** 2 * np.abs(ens._basis()[h, 0]) ** 4
    assert samples.mean() == pytest.approx(mean, rel=0.05)
    # chi-squared goodness of fit against the exponential law, ten equiprobable bins
    edges = stats.expon.ppf(np.linspace(0, 1, 11), scale=mean)
    counts, _ = np.histogram(samples, edges)
    chi2 = np.sum((counts - samples.size / 10) ** 2 / (samples.size / 10))
    assert stats.chi2.sf(chi2, df=9) > 1e-3


def test_zero_gain_gives_zero_frames(decomps):
    d = decomps["squeezer"]
    flat = SchmidtDecomposition(d.output_vectors, d.input_vectors, np.zeros(d.rank), d.grid, 1.0)
    ens = simulate_frames(assemble_2d(flat, 3), 3, seed=0)
    assert not np.any(ens.frame(1))


def test_mean_converges_to_analytic(mopa_spec):
    ens = simulate_frames(mopa_spec, 1250, seed=5)
    mean = ens.mean_intensity()
    ref = ens.analytic_mean()
    assert np.linalg.norm(mean - ref) / np.linalg.norm(ref) < 0.05


def test_thermal_variance_equals_mean_squared(mopa_spec):
    ens = simulate_frames(mopa_spec, 3000, seed=6)
    cs = covariance_slice(ens)
    peak = np.argsort(cs.mean_I)[-20:]
    ratio = np.diag(cs.C)[peak] / cs.mean_I[peak] ** 2
    assert np.median(ratio) == pytest.approx(1.0, abs=0.10)


def test_identical_frames_give_zero_covariance(grid):
    rows = np.tile(np.linspace(0, 1, grid.n_points), (10, 1))
    cs = covariance_from_rows(rows, grid)
    assert np.abs(cs.C).max() < 1e-30
    with pytest.raises(ValueError):
        covariance_from_rows(rows[:1], grid)


def test_rank_one_covariance_is_recovered(decomps):
    spec = assemble_2d(decomps["mopa"], 0)
    ens = simulate_frames(spec, 800, seed=2)
    modes, w = reconstruct_modes(covariance_slice(ens), 1)
    f = fidelities(modes, decomps["mopa"].output_modes[:1])
    assert f[0] > 0.999


def test_reconstruction_quality_and_structure(mopa_spec, decomps):
    ens = simulate_frames(mopa_spec, 1250, seed=0)
    modes, w = reconstruct_modes(covariance_slice(ens), 4)
    gram = np.array([[np.vdot(a.samples, b.samples) * a.grid.spacing for b in modes] for a in modes])
    assert np.abs(gram - np.eye(4)).max() < 1e-6
    assert np.all(np.diff(w) < 0)
    assert [nodal_lines(m) for m in modes] == [0, 1, 2, 3]
    f = fidelities(modes, decomps["mopa"].output_modes[:4])
    assert np.all(f > 0.95)


def test_direct_strategy_is_worse(mopa_spec, decomps):
    ens = simulate_frames(mopa_spec, 1250, seed=0)
    cs = covariance_slice(ens)
    truth = decomps["mopa"].output_modes[:4]
    good = fidelities(reconstruct_modes(cs, 4)[0], truth)
    direct = fidelities(reconstruct_modes(cs, 4, strategy="direct")[0], truth)
    assert direct.mean() < good.mean()
    with pytest.raises(ValueError):
        reconstruct_modes(cs, 4, strategy="nope")


def test_noise_warning(mopa_spec):
    clean = simulate_frames(mopa_spec, 1250, seed=0)
    peak = clean.analytic_mean().max()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        reconstruct_modes(covariance_slice(clean), 4)
    noisy = simulate_frames(mopa_spec, 400, seed=0, noise_std=10 * peak)
    with pytest.warns(RuntimeWarning):
        reconstruct_modes(covariance_slice(noisy), 4)


def test_half_plane_mask(mopa_spec):
    ens = simulate_frames(mopa_spec, 2, seed=0, half_plane="right")
    f = ens.frame(0)
    assert not f[ens.grid.theta < 0].any()
    with pytest.raises(ValueError):
        simulate_frames(mopa_spec, 2, seed=0, half_plane="up").frame(0)


def test_gauge_removal_recovers_real_modes(decomps, grid):
    modes = decomps["squeezer"].output_modes[:3]
    gauge = fit_quadratic_gauge(modes)
    fixed = [remove_gauge(m, gauge) for m in modes]
    for m in fixed:
        power_real = np.sum(np.abs(m.samples.real) ** 2) * grid.spacing
        power_imag = np.sum(np.abs(m.samples.imag) ** 2) * grid.spacing
        assert min(power_real, power_imag) < 0.05
