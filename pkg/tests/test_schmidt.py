import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mopasim.grids import TransverseGrid, hermite_gauss, overlap
from mopasim.pdc import BogoliubovKernel, CrystalConfig, propagate_kernels
from mopasim.schmidt import (
    assemble_2d,
    decompose,
    matched_kappa2,
    mode_gains_2d,
    overlap_1d,
    overlap_matrix_2d,
    schmidt_number,
    schmidt_number_2d,
)

G64 = TransverseGrid(64, 15e-3)


def _synthetic(vectors_out, vectors_in, s, grid):
    beta = sum(si * np.outer(a, b) for si, a, b in zip(s, vectors_out, vectors_in))
    return BogoliubovKernel(np.eye(grid.n_points), beta, grid, 1.0, 1.0)


def _hg_vec(n, w, grid):
    return hermite_gauss(n, w, grid).samples * np.sqrt(grid.spacing)


def test_rank_one_kernel():
    u = _hg_vec(0, 3e-3, G64)
    d = decompose(_synthetic([u], [u], [0.7], G64))
    assert d.rank == 1
    assert d.weights[0] == pytest.approx(0.49)
    assert abs(overlap(d.output_modes[0], hermite_gauss(0, 3e-3, G64))) == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(d.reconstruct(), 0.7 * np.outer(u, u), atol=1e-14)


def test_zero_kernel_has_empty_spectrum():
    d = decompose(BogoliubovKernel(np.eye(64), np.zeros((64, 64)), G64, 0.0, 0.0))
    assert d.rank == 0 and d.n_covering() == 0
    with pytest.raises(ValueError):
        schmidt_number(d.weights)
    with pytest.raises(ValueError):
        assemble_2d(d, 0)


def test_degeneracy_flagged():
    vec = [_hg_vec(n, 3e-3, G64) for n in range(3)]
    d = decompose(_synthetic(vec, vec, [0.9, 0.5, 0.5], G64))
    np.testing.assert_array_equal(d.degenerate, [False, True, True])


def test_weights_are_sinh_squared_of_gains(decomps):
    d = decomps["squeezer"]
    np.testing.assert_allclose(np.sinh(d.gains) ** 2, d.weights, rtol=1e-12)


def test_spectrum_sorted_and_orthonormal(decomps):
    for d in decomps.values():
        assert np.all(np.diff(d.weights) <= 0)
        n = min(d.rank, 40)
        U = d.output_vectors[:, :n]
        V = d.input_vectors[:n]
        assert np.abs(U.conj().T @ U - np.eye(n)).max() < 1e-10
        assert np.abs(V @ V.conj().T - np.eye(n)).max() < 1e-10


def test_leading_gains_nondegenerate(decomps):
    d = decomps["squeezer"]
    assert np.all(np.diff(d.gains[:12]) < 0)
    assert not d.degenerate[:12].any()


def test_reconstruction(kernels, decomps):
    for stage, d in decomps.items():
        beta = kernels[stage].beta
        err = np.linalg.norm(beta - d.reconstruct()) / np.linalg.norm(beta)
        assert err < 1e-8
        k = d.n_covering(0.999)
        assert np.sum(d.weights[:k]) >= 0.999 * np.sum(d.weights)
        assert np.sum(d.weights[: k - 1]) < 0.999 * np.sum(d.weights)


def test_phase_convention(decomps):
    d = decomps["squeezer"]
    for n in range(6):
        u = d.output_vectors[:, n]
        h = d.grid.n_points // 2
        ref = h + np.nonzero(np.abs(u[h:]) >= 0.5 * np.abs(u).max())[0][0]
        assert u[ref].real > 0 and u[ref].imag == pytest.approx(0, abs=1e-15)


def test_mode_parity_alternates(decomps):
    u = decomps["squeezer"].output_vectors
    for n in range(8):
        sign = 1 if n % 2 == 0 else -1
        assert np.abs(u[::-1, n] - sign * u[:, n]).max() < 1e-8


def test_fundamental_waist(decomps):
    assert 18e-6 <= decomps["squeezer"].fundamental_waist() <= 28e-6


def test_2d_gain_rule(decomps):
    d = decomps["squeezer"]
    sp = assemble_2d(d, 2)
    g = d.gains
    for (m, n), G in sp.gains.items():
        assert G == pytest.approx(g[m] * g[n] / d.collinear_g, rel=1e-14)
    assert sp.gains[(0, 1)] == sp.gains[(1, 0)]
    assert sp.ordered()[0] == (0, 0)
    np.testing.assert_array_equal(mode_gains_2d([1.0, 0.5], 2.0), [[0.5, 0.25], [0.25, 0.125]])


def test_2d_modes_factorize(decomps):
    sp = assemble_2d(decomps["squeezer"], 2)
    u = decomps["squeezer"].output_modes
    m = sp.mode(1, 2)
    np.testing.assert_array_equal(m.samples, np.outer(u[1].samples, u[2].samples))
    with pytest.raises(KeyError):
        sp.mode(3, 0)


def test_2d_schmidt_number_is_square_at_low_gain():
    k = propagate_kernels(CrystalConfig(gain_g=0.05), TransverseGrid())
    d = decompose(k)
    k1 = schmidt_number(d.weights)
    assert schmidt_number_2d(d) == pytest.approx(k1**2, rel=0.01)


def test_2d_schmidt_number_default(decomps):
    d = decomps["squeezer"]
    k2 = schmidt_number_2d(d)
    assert 30 < k2 < 100


def test_fundamental_width_grows_with_gain():
    # Schmidt number drops with gain (fewer modes dominate), which shows up as a
    # broadening (or at least no narrowing) of the fundamental mode.
    widths = []
    for g in (0.25, 1.05, 2.0, 3.0, 4.4):
        d = decompose(propagate_kernels(CrystalConfig(gain_g=g), TransverseGrid()))
        widths.append(d.fundamental_angular_width())
    assert np.all(np.diff(widths) >= -1e-12)
    assert widths[-1] > 1.05 * widths[0]


def test_self_overlap_of_symmetric_kernel_is_unit_diagonal():
    vec = [_hg_vec(n, 3e-3, G64) for n in range(4)]
    d = decompose(_synthetic(vec, vec, [1.2, 0.8, 0.5, 0.3], G64))
    o = np.abs(overlap_1d(d, d, 4)) ** 2
    np.testing.assert_allclose(o, np.eye(4), atol=1e-12)
    idx, K = overlap_matrix_2d(d, d, 2)
    np.testing.assert_allclose(np.diag(K), 1, atol=1e-12)


def test_self_overlap_of_real_stage(decomps):
    # the crystal's input and output modes differ slightly because beta is not symmetric
    d = decomps["squeezer"]
    o = np.abs(overlap_1d(d, d, 6)) ** 2
    assert np.all(np.diag(o) > 0.97)
    idx, K = overlap_matrix_2d(d, d, 2)
    assert np.all(K.sum(axis=1) <= 1 + 1e-9)


def test_matched_overlap_trend(decomps):
    k2 = matched_kappa2(decomps["squeezer"], decomps["mopa"], 2)
    assert k2[(0, 0)] > k2[(0, 1)] > k2[(0, 2)]
    assert k2[(0, 1)] == pytest.approx(k2[(1, 0)], rel=1e-12)
    unm = matched_kappa2(decomps["squeezer"], decomps["mopa_unmatched"], 2)
    assert all(unm[k] < k2[k] for k in k2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=30).filter(lambda w: max(w) > 1e-6))
def test_schmidt_number_bounds(w):
    K = schmidt_number(w)
    nonzero = sum(1 for x in w if x > 0)
    assert 1 - 1e-12 <= K <= nonzero + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_random_low_rank_kernels(rank, seed):
    rng = np.random.default_rng(seed)
    q1, _ = np.linalg.qr(rng.standard_normal((64, rank)) + 1j * rng.standard_normal((64, rank)))
    q2, _ = np.linalg.qr(rng.standard_normal((64, rank)) + 1j * rng.standard_normal((64, rank)))
    s = np.sort(rng.uniform(0.1, 3, rank))[::-1]
    d = decompose(_synthetic(q1.T, q2.T.conj(), s, G64))
    assert d.rank == rank
    np.testing.assert_allclose(np.sqrt(d.weights), s, rtol=1e-10)
    np.testing.assert_allclose(d.reconstruct(), (q1 * s) @ q2.conj().T, atol=1e-12)
