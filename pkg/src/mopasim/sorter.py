"""Phase-only multiplexed holograms for projective spatial-mode sorting.

A complex modulation M = A e^{i Phi} is written on a phase-only SLM as
theta = f(A) sin(Phi) with J1(f(A)) = c * A, so the first diffraction order
carries a field proportional to M.  Each target mode is encoded with its
complex conjugate on its own carrier grating; in the Fourier plane of a lens,
the on-axis amplitude of each first-order spot is then the projection of the
input field onto that target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import j1

from .errors import ConfigError, SpotCollisionError
from .grids import hermite_functions

BESSEL_CONSTANT = 0.58
J1_FIRST_MAX = 1.8411837813406593  # argmax of J1 on the ascending branch


def bessel_amplitude_map(A, constant: float = BESSEL_CONSTANT, n_iter: int = 64):
    """f(A) on the ascending branch of J1 with J1(f) = constant * A.

    Vectorized bisection on [0, first maximum of J1]; 64 halvings pin the root
    to machine precision.
    """
    A = np.asarray(A, dtype=float)
    if np.any((A < 0) | (A > 1)) or not np.all(np.isfinite(A)):
        raise ValueError("A must lie in [0, 1]")
    if constant > j1(J1_FIRST_MAX):
        raise ValueError(f"constant {constant} exceeds the maximum of J1")
    target = constant * A
    lo = np.zeros_like(A)
    hi = np.full_like(A, J1_FIRST_MAX)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = j1(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(target > 0, 0.5 * (lo + hi), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SLMGrid:
    """Pixel grid of the modulator; arrays are indexed [row (y), column (x)]."""

    nx: int = 792
    ny: int = 600
    pitch: float = 20e-6

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8 or not self.pitch > 0:
            raise ConfigError("invalid SLM grid")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def coords(self):
        x = (np.arange(self.nx) - self.nx / 2) * self.pitch
        y = (np.arange(self.ny) - self.ny / 2) * self.pitch
        return np.meshgrid(x, y)

    def carrier_phase(self, carrier) -> np.ndarray:
        """exp(2 pi i (kx * col / nx + ky * row / ny)) for carrier (kx, ky) in FFT bins."""
        kx, ky = carrier
        col = np.arange(self.nx)[None, :]
        row = np.arange(self.ny)[:, None]
        return np.exp(2j * np.pi * (kx * col / self.nx + ky * row / self.ny))


def hg_target(m: int, n: int, slm: SLMGrid, fwhm: float = 1.25e-3) -> np.ndarray:
    """Unit-norm HG_mn on the SLM, scaled so the fundamental's intensity FWHM is ``fwhm``."""
    w = fwhm / np.sqrt(2 * np.log(2))
    X, Y = slm.coords()
    hx = hermite_functions(m, np.sqrt(2) * X[0] / w)[m]
    hy = hermite_functions(n, np.sqrt(2) * Y[:, 0] / w)[n]
    f = np.outer(hy, hx).astype(complex)
    return f / np.linalg.norm(f)


@dataclass(frozen=True, eq=False)
class Hologram:
    """Phase pattern plus the complex first-order modulation it encodes.

    ``carriers`` holds (kx, ky) in FFT bins of the SLM grid, one per target in
    ``mode_ids``.
    """

    phase: np.ndarray
    modulation: np.ndarray
    slm: SLMGrid
    carriers: tuple
    mode_ids: tuple
    bessel_constant: float = BESSEL_CONSTANT

    @property
    def pixel_pitch(self) -> float:
        return self.slm.pitch

    def carrier_frequencies(self) -> list[tuple[float, float]]:
        """Carrier spatial frequencies (fx, fy) in cycles per meter."""
        s = self.slm
        return [(kx / (s.nx * s.pitch), ky / (s.ny * s.pitch)) for kx, ky in self.carriers]


def _check_carrier(carrier, slm: SLMGrid) -> None:
    kx, ky = carrier
    if not (abs(kx) < slm.nx / 2 and abs(ky) < slm.ny / 2):
        raise ValueError(f"carrier {carrier} at or beyond Nyquist of {slm.nx}x{slm.ny} pixels")


def encode(modulation: np.ndarray, constant: float = BESSEL_CONSTANT) -> np.ndarray:
    """Phase-only pattern f(A) sin(Phi), A normalized to max 1 over the aperture."""
    mag = np.abs(modulation)
    peak = mag.max()
    if peak == 0:
        return np.zeros(modulation.shape)
    return bessel_amplitude_map(mag / peak, constant) * np.sin(np.angle(modulation))


def synthesize_hologram(
    target: np.ndarray, carrier, slm: SLMGrid, mode_id=None, constant: float = BESSEL_CONSTANT
) -> Hologram:
    """Hologram that projects onto ``target`` at the +1 order displaced by ``carrier``."""
    target = np.asarray(target, dtype=complex)
    if target.shape != slm.shape:
        raise ValueError(f"target shape {target.shape} does not match SLM {slm.shape}")
    _check_carrier(carrier, slm)
    mod = np.conj(target) * slm.carrier_phase(carrier)
    mod.flags.writeable = False
    return Hologram(encode(mod, constant), mod, slm, (tuple(carrier),), (mode_id,), constant)


def check_spots(carriers: Sequence, slm: SLMGrid, window_bins: float, exclusion: float = 3.0) -> None:
    """Raise SpotCollisionError if first-order windows overlap each other or the zero order.

    ``exclusion`` is the minimum carrier separation in units of the window side.
    """
    c = np.array(carriers, dtype=float)
    if len({tuple(x) for x in c}) != len(c):
        raise SpotCollisionError("carrier frequencies must be pairwise distinct")
    sep = exclusion * window_bins
    for i in range(len(c)):
        if np.max(np.abs(c[i])) < sep:
            raise SpotCollisionError(f"carrier {tuple(c[i])} overlaps the zero order")
        for j in range(i + 1, len(c)):
            if np.max(np.abs(c[i] - c[j])) < sep:
                raise SpotCollisionError(f"spots {tuple(c[i])} and {tuple(c[j])} collide")


def multiplex(holograms: Sequence[Hologram], window_bins: float = 2.25) -> Hologram:
    """Sum the complex first-order modulations and re-encode as one phase pattern."""
    if not holograms:
        raise ValueError("need at least one hologram")
    if len(holograms) == 1:
        return holograms[0]
    slm = holograms[0].slm
    carriers = tuple(c for h in holograms for c in h.carriers)
    ids = tuple(i for h in holograms for i in h.mode_ids)
    check_spots(carriers, slm, window_bins)
    mod = np.zeros(slm.shape, dtype=complex)
    for h in holograms:
        if h.slm != slm:
            raise ValueError("holograms live on different SLM grids")
        mod += h.modulation
    mod.flags.writeable = False
    const = holograms[0].bessel_constant
    return Hologram(encode(mod, const), mod, slm, carriers, ids, const)


def grid_carriers(n_rows: int, n_cols: int, spacing: int, center=(200, 150)) -> list[tuple[int, int]]:
    """Row-major (kx, ky) carriers on a rectangular lattice around ``center``."""
    cx, cy = center
    out = []
    for r in range(n_rows):
        for c in range(n_cols):
            out.append((cx + (c - (n_cols - 1) // 2) * spacing, cy + (r - (n_rows - 1) // 2) * spacing))
    return out


@dataclass(frozen=True)
class SortReport:
    weights: dict
    window_powers: np.ndarray
    efficiency: float
    total_power: float
    input_power: float
    crosstalk: np.ndarray | None = field(default=None, repr=False)


def fourier_plane(field_: np.ndarray, h: Hologram, pad: int = 4) -> np.ndarray:
    """Unitary zero-padded DFT of the field after the hologram."""
    ny, nx = h.slm.shape
    return np.fft.fft2(field_ * np.exp(1j * h.phase), s=(ny * pad, nx * pad), norm="ortho")


def window_powers(F: np.ndarray, h: Hologram, pad: int = 4, window_bins: float = 2.25) -> np.ndarray:
    """Integrated |F|^2 over a square window at each carrier's first-order spot."""
    half = int(round(window_bins * pad)) // 2
    ny, nx = F.shape
    out = np.empty(len(h.carriers))
    offs = np.arange(-half, half + 1)
    for i, (kx, ky) in enumerate(h.carriers):
        rows = (ky * pad + offs) % ny
        cols = (kx * pad + offs) % nx
        out[i] = np.sum(np.abs(F[np.ix_(rows, cols)]) ** 2)
    return out


def simulate_sorting(field_: np.ndarray, h: Hologram, pad: int = 4, window_bins: float = 2.25) -> SortReport:
    """Fourier-plane sorting of ``field_`` (on the SLM grid) by hologram ``h``."""
    field_ = np.asarray(field_, dtype=complex)
    if field_.shape != h.slm.shape:
        raise ValueError("field and hologram must share the SLM grid")
    F = fourier_plane(field_, h, pad)
    p = window_powers(F, h, pad, window_bins)
    p_in = float(np.sum(np.abs(field_) ** 2))
    tot = p.sum()
    weights = {mid: (float(v / tot) if tot > 0 else 0.0) for mid, v in zip(h.mode_ids, p)}
    return SortReport(
        weights=weights,
        window_powers=p,
        efficiency=float(tot / p_in) if p_in > 0 else 0.0,
        total_power=float(np.sum(np.abs(F) ** 2)),
        input_power=p_in,
    )


def crosstalk_matrix(inputs: Sequence[np.ndarray], h: Hologram, pad: int = 4, window_bins: float = 2.25) -> np.ndarray:
    """Window powers, rows = input fields, columns = detection spots."""
    return np.array([simulate_sorting(f, h, pad, window_bins).window_powers for f in inputs])


def dominance_db(X: np.ndarray) -> np.ndarray:
    """Per row: diagonal over the largest off-diagonal entry, in dB."""
    off = np.where(np.eye(len(X), dtype=bool), -np.inf, X).max(axis=1)
    return 10 * np.log10(np.diag(X) / off)


DEFAULT_MODES = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2))


def nine_mode_sorter(
    slm: SLMGrid | None = None,
    modes=DEFAULT_MODES,
    spacing: int = 60,
    center=(200, 150),
    fwhm: float = 1.25e-3,
    window_bins: float = 2.25,
):
    """Targets and multiplexed hologram for a 3x3 carrier lattice."""
    slm = slm or SLMGrid()
    side = int(np.ceil(np.sqrt(len(modes))))
    carriers = grid_carriers(side, side, spacing, center)[: len(modes)]
    targets = [hg_target(m, n, slm, fwhm) for m, n in modes]
    holos = [synthesize_hologram(t, c, slm, mid) for t, c, mid in zip(targets, carriers, modes)]
    return targets, multiplex(holos, window_bins)
