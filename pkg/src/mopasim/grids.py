"""Transverse sampling grids and Hermite-Gauss / Laguerre-Gauss mode functions.

All mode functions live in far-field angle ``theta`` (radians).  Inner products
are spacing-weighted sums, so a mode with unit norm satisfies
``sum(|f|**2) * spacing == 1`` in 1D and ``... * spacing**2 == 1`` in 2D.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import AliasingError, GridMismatchError, ResolutionError

NORM_TOL = 1e-10


@dataclass(frozen=True)
class TransverseGrid:
    """Uniform grid in transverse angle, symmetric about zero.

    Sample ``i`` sits at ``(i - n_points/2 + 1/2) * spacing``, so an even grid has
    no sample exactly at ``theta = 0`` and mirrors exactly under ``i -> n-1-i``.
    """

    n_points: int = 320
    extent: float = 30e-3
    wavelength: float = 710e-9

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise ValueError(f"n_points must be an integer >= 16, got {self.n_points}")
        if self.n_points % 2:
            raise ValueError("n_points must be even (parity-symmetric grid)")
        if not self.extent > 0 or not self.wavelength > 0:
            raise ValueError("extent and wavelength must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n_points

    @property
    def k(self) -> float:
        """Vacuum wavenumber 2*pi/wavelength."""
        return 2.0 * np.pi / self.wavelength

    @cached_property
    def theta(self) -> np.ndarray:
        t = (np.arange(self.n_points) - self.n_points / 2 + 0.5) * self.spacing
        t.flags.writeable = False
        return t

    @cached_property
    def q(self) -> np.ndarray:
        """Transverse wavevector samples, q = k * theta."""
        q = self.k * self.theta
        q.flags.writeable = False
        return q

    @property
    def dq(self) -> float:
        return self.k * self.spacing

    def to_q(self, theta):
        return self.k * np.asarray(theta)

    def to_theta(self, q):
        return np.asarray(q) / self.k

    def compatible(self, other: "TransverseGrid") -> bool:
        return (
            self.n_points == other.n_points
            and np.isclose(self.extent, other.extent, rtol=1e-12, atol=0)
            and np.isclose(self.wavelength, other.wavelength, rtol=1e-12, atol=0)
        )


def _check_grid(a: TransverseGrid, b: TransverseGrid) -> None:
    if not a.compatible(b):
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ModeFunction1D:
    """Unit-norm complex mode on a :class:`TransverseGrid`."""

    samples: np.ndarray
    grid: TransverseGrid
    normalize: bool = field(default=True, repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got shape {s.shape}")
        norm = np.sqrt(np.sum(np.abs(s) ** 2) * self.grid.spacing)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("mode function has zero or non-finite norm")
        if self.normalize:
            s = s / norm
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"mode norm {norm} deviates from 1")
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.intensity) * self.grid.spacing))


@dataclass(frozen=True, eq=False)
class ModeFunction2D:
    """Unit-norm complex mode on ``grid x grid``; ``samples[i, j]`` is at (theta_x[i], theta_y[j])."""

    samples: np.ndarray
    grid: TransverseGrid
    indices: tuple[int, int] | None = None
    normalize: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = self.grid.n_points
        s = np.array(self.samples, dtype=complex)
        if s.shape != (n, n):
            raise ValueError(f"expected ({n}, {n}) samples, got {s.shape}")
        norm = np.sqrt(np.sum(np.abs(s) ** 2)) * self.grid.spacing
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("mode function has zero or non-finite norm")
        if self.normalize:
            s = s / norm
        elif abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"mode norm {norm} deviates from 1")
        object.__setattr__(self, "samples", _frozen(s))

    @classmethod
    def from_product(cls, fx: ModeFunction1D, fy: ModeFunction1D, indices=None) -> "ModeFunction2D":
        """Tensor product ``fx(theta_x) * fy(theta_y)``, kept bit-exact (no renormalization)."""
        _check_grid(fx.grid, fy.grid)
        return cls(np.outer(fx.samples, fy.samples), fx.grid, indices, normalize=False)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.intensity)) * self.grid.spacing)


def hermite_functions(max_order: int, s: np.ndarray) -> np.ndarray:
    """Rows 0..max_order of the orthonormal Hermite functions at points ``s``.

    Uses the three-term recurrence, which stays finite for high orders where
    the explicit polynomial would overflow.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty((max_order + 1, s.size))
    out[0] = np.pi ** -0.25 * np.exp(-(s**2) / 2)
    if max_order >= 1:
        out[1] = np.sqrt(2.0) * s * out[0]
    for n in range(2, max_order + 1):
        out[n] = np.sqrt(2.0 / n) * s * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def hermite_gauss(order: int, waist: float, grid: TransverseGrid) -> ModeFunction1D:
    """Normalized HG_order with 1/e^2 intensity radius ``waist`` (radians) in the far field."""
    if order < 0 or int(order) != order:
        raise ValueError("order must be a nonnegative integer")
    if not waist > 2 * grid.spacing:
        raise ResolutionError(f"waist {waist:g} rad is not resolved by spacing {grid.spacing:g}")
    if order > grid.n_points // 4:
        raise AliasingError(f"order {order} exceeds n_points/4 = {grid.n_points // 4}")
    s = np.sqrt(2.0) * grid.theta / waist
    return ModeFunction1D(hermite_functions(order, s)[order], grid)


def hermite_gauss_2d(m: int, n: int, waist: float, grid: TransverseGrid) -> ModeFunction2D:
    return ModeFunction2D.from_product(
        hermite_gauss(m, waist, grid), hermite_gauss(n, waist, grid), (m, n)
    )


def superpose(modes: Sequence[ModeFunction2D], weights: Sequence[complex]) -> ModeFunction2D:
    """Normalized linear combination ``sum_k w_k * modes[k]``."""
    if len(modes) != len(weights) or not modes:
        raise ValueError("need equally many modes and weights")
    base = modes[0].grid
    acc = np.zeros_like(modes[0].samples)
    for mode, w in zip(modes, weights):
        _check_grid(base, mode.grid)
        acc = acc + complex(w) * mode.samples
    return ModeFunction2D(acc, base)


def laguerre_from_hg(hg01: ModeFunction2D, hg10: ModeFunction2D, sign: int = 1) -> ModeFunction2D:
    """(HG01 + sign * i * HG10) / sqrt(2): the l = +1 (sign=+1) or l = -1 donut."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _check_grid(hg01.grid, hg10.grid)
    return superpose([hg01, hg10], [1 / np.sqrt(2), sign * 1j / np.sqrt(2)])


def overlap(a, b) -> complex:
    """Spacing-weighted inner product <a|b> = sum conj(a) * b * dtheta^d."""
    _check_grid(a.grid, b.grid)
    if type(a) is not type(b):
        raise TypeError("overlap needs two 1D or two 2D modes")
    measure = a.grid.spacing if isinstance(a, ModeFunction1D) else a.grid.spacing**2
    return complex(np.vdot(a.samples, b.samples) * measure)


def intensity_radius(mode: ModeFunction1D, level: float = np.exp(-2)) -> float:
    """Half-width (radians) where |u|^2 falls to ``level`` of its peak, interpolated between samples.

    Measured outward from the peak on both sides and averaged.
    """
    inten = mode.intensity
    theta = mode.grid.theta
    i0 = int(np.argmax(inten))
    peak = inten[i0]
    if 0 < i0 < inten.size - 1 and np.all(inten[i0 - 1 : i0 + 2] > 0):
        # parabolic refinement of log-intensity: the true maximum usually lies between samples
        lm, l0, lp = np.log(inten[i0 - 1 : i0 + 2])
        curv = lm - 2 * l0 + lp
        if curv < 0:
            peak = np.exp(l0 - (lp - lm) ** 2 / (8 * curv))
    thr = level * peak
    radii = []
    for step in (1, -1):
        j = i0
        while 0 <= j + step < inten.size and inten[j + step] > thr:
            j += step
        if not 0 <= j + step < inten.size:
            raise ResolutionError("mode does not decay to the requested level inside the grid")
        lo, hi = inten[j + step], inten[j]
        if lo > 0:  # interpolate log-intensity, exact for a Gaussian profile
            t = np.interp(np.log(thr), [np.log(lo), np.log(hi)], [theta[j + step], theta[j]])
        else:
            t = np.interp(thr, [lo, hi], [theta[j + step], theta[j]])
        radii.append(abs(t - theta[i0]))
    return float(np.mean(radii))


def near_field_waist(angular_waist: float, wavelength: float) -> float:
    """Gaussian near-field waist conjugate to a far-field 1/e^2 half-angle."""
    return wavelength / (np.pi * angular_waist)


def angular_waist(near_waist: float, wavelength: float) -> float:
    return wavelength / (np.pi * near_waist)
