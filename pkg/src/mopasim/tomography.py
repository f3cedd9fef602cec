"""Thermal single-shot frames and mode reconstruction from intensity covariances.

A single subsystem of the MOPA output is a thermal mixture of its Schmidt
modes, so each frame is |sum_mn c_mn u_mn|^2 with independent circular
Gaussian c_mn of mean photon number Lambda_mn.  Frames are described by their
coefficients and rendered on demand, which keeps 1D slices cheap and memory
bounded.

Reconstruction uses the Siegert relation: for thermal light the intensity
covariance is |G1|^2 with G1(x, x') = sum_m lambda_m u_m(x) u_m*(x').
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.optimize import minimize_scalar

from .grids import ModeFunction1D, TransverseGrid, overlap
from .schmidt import Mode2DSpectrum

NOISE_WARN_FRACTION = 0.10


def frame_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for frame ``index``; independent of worker layout."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True, eq=False)
class FrameEnsemble:
    """Monte-Carlo ensemble of far-field intensity frames.

    Attributes:
        coefficients: (n_frames, r, r) complex mode amplitudes, r = max_order + 1.
        spectrum: the source Mode2DSpectrum.
        rng_seed: seed used for every frame's counter-based generator.
        noise_std: additive white readout noise per pixel (0 disables).
        half_plane: optional 'left' / 'right' mask on theta_x before readout.
    """

    coefficients: np.ndarray
    spectrum: Mode2DSpectrum
    rng_seed: int
    noise_std: float = 0.0
    half_plane: str | None = None

    @property
    def n_frames(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def grid(self) -> TransverseGrid:
        return self.spectrum.grid

    def _basis(self) -> np.ndarray:
        r = self.spectrum.max_order + 1
        d = self.spectrum.decomposition
        return d.output_vectors[:, :r] / np.sqrt(self.grid.spacing)

    def _mask(self) -> np.ndarray:
        th = self.grid.theta
        if self.half_plane is None:
            return np.ones_like(th)
        if self.half_plane == "left":
            return (th < 0).astype(float)
        if self.half_plane == "right":
            return (th > 0).astype(float)
        raise ValueError(f"unknown half_plane {self.half_plane!r}")

    def _noise(self, index: int, shape) -> np.ndarray | float:
        if self.noise_std <= 0:
            return 0.0
        rng = np.random.default_rng(np.random.SeedSequence([int(self.rng_seed), int(index), 1]))
        return self.noise_std * rng.standard_normal(shape)

    def frame(self, index: int) -> np.ndarray:
        """Intensity frame ``index`` on grid x grid, indexed [theta_x, theta_y]."""
        u = self._basis()
        field_ = u @ self.coefficients[index] @ u.T
        out = np.abs(field_) ** 2 * self._mask()[:, None]
        if self.noise_std > 0:
            out = np.clip(out + self._noise(index, out.shape), 0.0, None)
        return out

    def frames(self):
        for i in range(self.n_frames):
            yield self.frame(i)

    def row_slices(self, theta_y_index: int) -> np.ndarray:
        """(n_frames, n_points) intensities along theta_x at fixed theta_y."""
        u = self._basis()
        d = self.coefficients @ u[theta_y_index]  # (n_frames, r): sum_n c_mn u_n(y0)
        rows = np.abs(d @ u.T) ** 2 * self._mask()
        if self.noise_std > 0:
            # noise for a row is the matching row of the full-frame noise field
            n = self.grid.n_points
            rows = np.stack(
                [np.clip(r + self._noise(i, (n, n))[:, theta_y_index], 0.0, None) for i, r in enumerate(rows)]
            )
        return rows

    def mean_intensity(self) -> np.ndarray:
        acc = np.zeros((self.grid.n_points,) * 2)
        for f in self.frames():
            acc += f
        return acc / self.n_frames

    def analytic_mean(self) -> np.ndarray:
        u = self._basis()
        lam = np.sinh(self.spectrum.gain_matrix) ** 2
        inten = np.abs(u) ** 2
        return (inten @ lam @ inten.T) * self._mask()[:, None]

    def slice_weights(self, theta_y_index: int) -> np.ndarray:
        """Thermal weights lambda_m = sum_n Lambda_mn |u_n(y0)|^2 of the 1D slice."""
        u = self._basis()
        lam = np.sinh(self.spectrum.gain_matrix) ** 2
        return lam @ (np.abs(u[theta_y_index]) ** 2)


def simulate_frames(
    spectrum: Mode2DSpectrum,
    n_frames: int,
    seed: int,
    noise_std: float = 0.0,
    half_plane: str | None = None,
) -> FrameEnsemble:
    """Draw thermal amplitudes for every 2D mode, one generator per frame."""
    if n_frames < 2:
        raise ValueError("need at least two frames")
    lam = np.sinh(spectrum.gain_matrix) ** 2
    amp = np.sqrt(lam / 2.0)
    coeffs = np.empty((n_frames,) + lam.shape, dtype=complex)
    for i in range(n_frames):
        z = frame_rng(seed, i).standard_normal((2,) + lam.shape)
        coeffs[i] = amp * (z[0] + 1j * z[1])
    coeffs.flags.writeable = False
    return FrameEnsemble(coeffs, spectrum, int(seed), float(noise_std), half_plane)


@dataclass(frozen=True, eq=False)
class CovarianceSlice:
    C: np.ndarray
    mean_I: np.ndarray
    grid: TransverseGrid
    n_frames: int
    theta_y_index: int | None = None


def covariance_from_rows(rows: np.ndarray, grid: TransverseGrid, theta_y_index=None) -> CovarianceSlice:
    """Unbiased sample covariance of intensity rows (frames along axis 0)."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if n < 2:
        raise ValueError("need at least two frames")
    mean = rows.mean(axis=0)
    dev = rows - mean
    C = dev.T @ dev / (n - 1)
    C = 0.5 * (C + C.T)
    return CovarianceSlice(C, mean, grid, n, theta_y_index)


def covariance_slice(ensemble: FrameEnsemble, theta_y_index: int | None = None) -> CovarianceSlice:
    """Intensity covariance over theta_x at fixed theta_y (default: next to the axis)."""
    if theta_y_index is None:
        theta_y_index = ensemble.grid.n_points // 2
    return covariance_from_rows(ensemble.row_slices(theta_y_index), ensemble.grid, theta_y_index)


def _propagate_signs(mag: np.ndarray) -> np.ndarray:
    """Signed kernel from |G1|: positive diagonal, continuity along each row.

    Walking outward from the diagonal, each new sample takes the sign that is
    closer to the linear extrapolation of the two previous signed samples, so
    V-shaped minima of |G1| become zero crossings.
    """
    n = mag.shape[0]
    out = np.zeros_like(mag)
    for i in range(n):
        row = mag[i]
        s = np.zeros(n)
        s[i] = row[i]
        for step in (1, -1):
            j = i + step
            while 0 <= j < n:
                prev = s[j - step]
                prev2 = s[j - 2 * step] if 0 <= j - 2 * step < n and j - 2 * step != i - step else prev
                pred = 2 * prev - prev2
                s[j] = row[j] if abs(row[j] - pred) <= abs(-row[j] - pred) else -row[j]
                j += step
        out[i] = s
    return 0.5 * (out + out.T)


def _denoise(cs: CovarianceSlice, n_sigma: float) -> np.ndarray:
    """max(C, 0) with entries below n_sigma standard errors set to zero."""
    C = np.clip(cs.C, 0.0, None)
    if n_sigma <= 0:
        return C
    mu = np.clip(cs.mean_I, 0.0, None)
    # thermal fourth moments: Var(C_ij) ~ (mu_i^2 mu_j^2 + C_ij^2) / n
    sigma = np.sqrt((np.outer(mu, mu) ** 2 + cs.C**2) / cs.n_frames)
    C[C < n_sigma * sigma] = 0.0
    return C


def reconstruct_modes(
    cs: CovarianceSlice,
    n_modes: int,
    strategy: str = "sqrt-sign",
    n_sigma: float = 3.0,
    smoothing: float = 1e-3,
    parity: bool = True,
) -> tuple[list[ModeFunction1D], np.ndarray]:
    """Modes and weights from an intensity covariance slice.

    Args:
        cs: covariance slice.
        n_modes: number of modes to return.
        strategy: ``'sqrt-sign'`` takes the elementwise square root of the
            (denoised) covariance and restores signs by continuity before the
            eigendecomposition; ``'direct'`` decomposes C itself, which returns
            eigenvectors of |G1|^2 and is biased toward narrower profiles.
        n_sigma: entries of C below this many standard errors are treated as
            zero before the square root, which suppresses the noise pedestal.
        smoothing: Gaussian smoothing width of C in radians (0 disables).  The
            modes are sampled far finer than their structure, so a ~1 mrad
            kernel averages out sampling noise while barely biasing them.
        parity: symmetrize the kernel under theta -> -theta, appropriate for a
            centered symmetric pump; this stops even and odd modes of similar
            weight from mixing through noise.

    Returns:
        Orthonormal reconstructed modes (descending weight) and their weights.
    """
    n_pts = cs.C.shape[0]
    if not 0 < n_modes <= n_pts:
        raise ValueError("n_modes out of range")
    if strategy == "sqrt-sign":
        if smoothing > 0:
            C = gaussian_filter(cs.C, smoothing / cs.grid.spacing, mode="constant")
            cs = CovarianceSlice(C, cs.mean_I, cs.grid, cs.n_frames, cs.theta_y_index)
        K = _propagate_signs(np.sqrt(_denoise(cs, n_sigma)))
    elif strategy == "direct":
        K = cs.C
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if parity:
        K = 0.5 * (K + K[::-1, ::-1])
    vals, vecs = np.linalg.eigh(K * cs.grid.spacing)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    # A valid G1 kernel is positive semidefinite.  Sampling noise in the far
    # tails leaves a pedestal of many tiny negative eigenvalues even for clean
    # data, so the excursion is measured by the most negative eigenvalue
    # relative to the leading one rather than by the summed magnitudes.
    neg = max(0.0, -vals[-1]) / vals[0] if vals[0] > 0 else 0.0
    if neg > NOISE_WARN_FRACTION:
        warnings.warn(
            f"negative eigenvalue mass {neg:.1%} of the leading eigenvalue suggests noisy covariance data",
            RuntimeWarning,
            stacklevel=2,
        )
    modes = []
    for m in range(n_modes):
        v = vecs[:, m]
        # same real-positive-lobe convention as the Schmidt modes
        h = v.size // 2
        hits = np.nonzero(np.abs(v[h:]) >= 0.5 * np.abs(v).max())[0]
        ref = v[h + hits[0]] if hits.size else v[np.argmax(np.abs(v))]
        v = v * np.sign(ref)
        modes.append(ModeFunction1D(v / np.sqrt(cs.grid.spacing), cs.grid))
    return modes, vals[:n_modes]


def _realness(vecs: np.ndarray, dx: float) -> float:
    """Mean power fraction capturable by a real function after optimal global phase."""
    return float(np.mean([(1 + abs(np.sum(v**2)) * dx) / 2 for v in vecs]))


def fit_quadratic_gauge(modes: list[ModeFunction1D]) -> float:
    """Curvature a of the common phase exp(i a theta^2) that makes ``modes`` most real.

    The MOPA output modes share a quadratic (lens-like) phase, which the
    intensity covariance cannot see; comparisons against a real-valued
    reconstruction are made after removing it.
    """
    grid = modes[0].grid
    th2 = grid.theta**2
    samples = np.array([m.samples for m in modes])
    scale = 1.0 / grid.extent**2

    def cost(a):
        return -_realness(samples * np.exp(-1j * a * scale * th2), grid.spacing)

    coarse = np.linspace(-20, 20, 81)
    best = coarse[np.argmin([cost(a) for a in coarse])]
    res = minimize_scalar(cost, bracket=(best - 0.5, best, best + 0.5))
    return float(res.x * scale)


def remove_gauge(mode: ModeFunction1D, curvature: float) -> ModeFunction1D:
    return ModeFunction1D(mode.samples * np.exp(-1j * curvature * mode.grid.theta**2), mode.grid)


def fidelities(reconstructed, truth, gauge: bool = True) -> np.ndarray:
    """|<rec_m | truth_m>|^2, optionally after removing the truth's common quadratic phase."""
    truth = list(truth)
    if gauge:
        a = fit_quadratic_gauge(truth)
        truth = [remove_gauge(t, a) for t in truth]
    return np.array([abs(overlap(r, t)) ** 2 for r, t in zip(reconstructed, truth)])


def nodal_lines(mode: ModeFunction1D, rel_threshold: float = 0.05) -> int:
    """Sign changes of the real part among samples above ``rel_threshold`` of the peak."""
    v = mode.samples.real
    big = np.abs(v) > rel_threshold * np.abs(v).max()
    signs = np.sign(v[big])
    return int(np.count_nonzero(np.diff(signs)))
