"""Joint Schmidt decomposition of beta and the factorized 2D mode spectrum."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grids import ModeFunction1D, ModeFunction2D, TransverseGrid, intensity_radius, near_field_waist
from .pdc import BogoliubovKernel

# singular values below this fraction of the largest are discarded as numerical noise
RANK_FLOOR = 1e-10
DEGENERACY_RTOL = 1e-6


def _reference_index(vec: np.ndarray) -> int:
    """First sample, walking outward from the grid center on the q > 0 side,
    whose magnitude reaches half the peak.  Falls back to the global peak."""
    mag = np.abs(vec)
    h = vec.size // 2
    hits = np.nonzero(mag[h:] >= 0.5 * mag.max())[0]
    return int(h + hits[0]) if hits.size else int(np.argmax(mag))


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """beta = sum_n sqrt(Lambda_n) u_n(q) psi_n(q').

    Vectors are stored spacing-weighted and orthonormal in the plain Euclidean
    sense: ``output_vectors[:, n]`` is u_n, ``input_vectors[n]`` is psi_n.
    Each u_n is rotated real-positive at its reference sample (see
    :func:`_reference_index`) and psi_n carries the compensating phase, so the
    product, and hence beta, is unchanged.
    """

    output_vectors: np.ndarray
    input_vectors: np.ndarray
    weights: np.ndarray
    grid: TransverseGrid
    collinear_g: float
    nominal_g: float = 0.0
    degenerate: np.ndarray = field(default=None, repr=False)

    @property
    def gains(self) -> np.ndarray:
        return np.arcsinh(np.sqrt(self.weights))

    @property
    def rank(self) -> int:
        return int(self.weights.size)

    @cached_property
    def output_modes(self) -> list[ModeFunction1D]:
        scale = 1.0 / np.sqrt(self.grid.spacing)
        return [ModeFunction1D(self.output_vectors[:, n] * scale, self.grid) for n in range(self.rank)]

    @cached_property
    def input_modes(self) -> list[ModeFunction1D]:
        scale = 1.0 / np.sqrt(self.grid.spacing)
        return [ModeFunction1D(self.input_vectors[n] * scale, self.grid) for n in range(self.rank)]

    def reconstruct(self, n_modes: int | None = None) -> np.ndarray:
        r = self.rank if n_modes is None else n_modes
        return (self.output_vectors[:, :r] * np.sqrt(self.weights[:r])) @ self.input_vectors[:r]

    def n_covering(self, fraction: float = 0.999) -> int:
        """Smallest mode count whose weights sum to ``fraction`` of the total."""
        if self.rank == 0:
            return 0
        c = np.cumsum(self.weights) / self.weights.sum()
        return int(np.searchsorted(c, fraction) + 1)

    def fundamental_angular_width(self) -> float:
        """1/e^2 intensity half-angle of u_0, radians."""
        return intensity_radius(self.output_modes[0])

    def fundamental_waist(self) -> float:
        """Near-field 1/e^2 waist of u_0, meters."""
        return near_field_waist(self.fundamental_angular_width(), self.grid.wavelength)


def decompose(kernel: BogoliubovKernel, floor: float = RANK_FLOOR) -> SchmidtDecomposition:
    """SVD of the spacing-weighted beta with phase fixing and degeneracy flags.

    Modes whose singular value falls below ``floor`` times the largest are
    dropped; the reconstruction error is then of order ``floor``.
    """
    u, s, vh = np.linalg.svd(kernel.beta)
    if s.size == 0 or s[0] == 0:
        keep = 0
    else:
        keep = int(np.count_nonzero(s > floor * s[0]))
    u, s, vh = u[:, :keep].copy(), s[:keep], vh[:keep].copy()
    for n in range(keep):
        ref = u[_reference_index(u[:, n]), n]
        ph = ref / abs(ref)
        u[:, n] /= ph
        vh[n] *= ph
    degenerate = np.zeros(keep, dtype=bool)
    if keep > 1:
        close = np.abs(np.diff(s)) < DEGENERACY_RTOL * s[:-1]
        degenerate[:-1] |= close
        degenerate[1:] |= close
    return SchmidtDecomposition(
        output_vectors=u,
        input_vectors=vh,
        weights=s**2,
        grid=kernel.grid,
        collinear_g=float(kernel.peak_gain),
        nominal_g=float(kernel.gain_g),
        degenerate=degenerate,
    )


def schmidt_number(weights) -> float:
    """Participation ratio (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or not np.any(w > 0):
        raise ValueError("Schmidt number undefined for all-zero weights")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return float(w.sum() ** 2 / np.sum(w**2))


def mode_gains_2d(gains_1d, collinear_g: float) -> np.ndarray:
    """G_mn = g_m g_n / g as a matrix."""
    g = np.asarray(gains_1d, dtype=float)
    return np.outer(g, g) / collinear_g


@dataclass(frozen=True, eq=False)
class Mode2DSpectrum:
    """Factorized 2D modes u_m(theta_x) u_n(theta_y) with gains G_mn.

    Mode functions are built on first access and cached.
    """

    decomposition: SchmidtDecomposition
    max_order: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> TransverseGrid:
        return self.decomposition.grid

    @property
    def indices(self) -> list[tuple[int, int]]:
        r = self.max_order + 1
        return [(m, n) for m in range(r) for n in range(r)]

    @cached_property
    def gain_matrix(self) -> np.ndarray:
        d = self.decomposition
        return mode_gains_2d(d.gains[: self.max_order + 1], d.collinear_g)

    @property
    def gains(self) -> dict[tuple[int, int], float]:
        G = self.gain_matrix
        return {(m, n): float(G[m, n]) for m, n in self.indices}

    @property
    def weights(self) -> dict[tuple[int, int], float]:
        return {k: float(np.sinh(v) ** 2) for k, v in self.gains.items()}

    def mode(self, m: int, n: int) -> ModeFunction2D:
        if not (0 <= m <= self.max_order and 0 <= n <= self.max_order):
            raise KeyError(f"mode ({m}, {n}) outside max_order {self.max_order}")
        key = (m, n)
        if key not in self._cache:
            u = self.decomposition.output_modes
            self._cache[key] = ModeFunction2D.from_product(u[m], u[n], key)
        return self._cache[key]

    @property
    def modes(self) -> dict[tuple[int, int], ModeFunction2D]:
        return {k: self.mode(*k) for k in self.indices}

    def ordered(self, n_modes: int | None = None) -> list[tuple[int, int]]:
        """Mode indices sorted by descending gain, ties broken by (m + n, -n)."""
        keys = sorted(self.indices, key=lambda k: (-round(self.gain_matrix[k], 12), k[0] + k[1], -k[1]))
        return keys if n_modes is None else keys[:n_modes]


def assemble_2d(d: SchmidtDecomposition, max_order: int) -> Mode2DSpectrum:
    if max_order < 0 or max_order >= d.rank:
        raise ValueError(f"max_order {max_order} needs at least {max_order + 1} retained modes, have {d.rank}")
    return Mode2DSpectrum(d, int(max_order))


def schmidt_number_2d(d: SchmidtDecomposition, n_modes: int | None = None) -> float:
    """2D participation ratio of sinh^2(G_mn) over all retained 1D pairs."""
    g = d.gains if n_modes is None else d.gains[:n_modes]
    return schmidt_number(np.sinh(mode_gains_2d(g, d.collinear_g)) ** 2)


def overlap_1d(source: SchmidtDecomposition, target: SchmidtDecomposition, n_modes: int) -> np.ndarray:
    """o[k, m] = <psi_k^target | u_m^source>, target input modes vs source output modes."""
    if not source.grid.compatible(target.grid):
        from .errors import GridMismatchError

        raise GridMismatchError("spectra live on different grids")
    n = min(n_modes, source.rank, target.rank)
    return target.input_vectors[:n].conj() @ source.output_vectors[:, :n]


def overlap_matrix_2d(source: SchmidtDecomposition, target: SchmidtDecomposition, max_order: int):
    """Power overlaps |kappa|^2 between all 2D modes up to ``max_order``.

    Returns ``(indices, K)`` with ``K[a, b] = |<psi_target(idx[a]) | u_source(idx[b])>|^2``;
    the 2D integral factorizes into a product of 1D overlaps.
    """
    o = np.abs(overlap_1d(source, target, max_order + 1)) ** 2
    r = max_order + 1
    idx = [(m, n) for m in range(r) for n in range(r)]
    K = np.empty((len(idx), len(idx)))
    for a, (k, l) in enumerate(idx):
        for b, (m, n) in enumerate(idx):
            K[a, b] = o[k, m] * o[l, n]
    return idx, K


def matched_kappa2(source: SchmidtDecomposition, target: SchmidtDecomposition, max_order: int) -> dict:
    """Diagonal |kappa_mn,mn|^2 keyed by (m, n)."""
    idx, K = overlap_matrix_2d(source, target, max_order)
    return {k: float(K[i, i]) for i, k in enumerate(idx)}
