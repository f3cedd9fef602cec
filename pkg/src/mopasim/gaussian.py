"""Single-mode Gaussian algebra for the squeezer -> loss -> MOPA cascade.

Covariances are 2x2 in (x, p) with shot-noise normalization: vacuum is the
identity.  The squeezer squeezes p.  At MOPA pump phase 0 the amplifier
stretches p, i.e. the squeezed quadrature is the one that gets amplified.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import PhysicsError

FINITE_GAIN_WARN = 0.01


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(v):
    return 10.0 * np.log10(v)


@dataclass(frozen=True)
class ModeGaussianState:
    """Squeezed vacuum in one 2D mode as seen through its MOPA match.

    ``kappa2`` is the power overlap with the matching amplifier mode and
    ``extra_loss`` any further pre-amplification transmission; both act as loss.
    """

    mode_id: tuple[int, int]
    g_sq: float
    kappa2: float
    extra_loss: float = 1.0

    def __post_init__(self):
        if self.g_sq < 0:
            raise ValueError("g_sq must be nonnegative")
        if not 0 <= self.kappa2 <= 1 + 1e-12:
            raise ValueError(f"kappa2 must lie in [0, 1], got {self.kappa2}")
        if not 0 <= self.extra_loss <= 1:
            raise ValueError("extra_loss must lie in [0, 1]")

    @property
    def transmission(self) -> float:
        return float(min(self.kappa2, 1.0) * self.extra_loss)

    def covariance(self) -> np.ndarray:
        """Covariance entering the amplifier, after overlap loss."""
        return apply_loss(squeezed_covariance(self.g_sq), self.transmission)


@dataclass(frozen=True)
class MopaConfig:
    """Amplifier setting; ``G`` may be one gain for all modes or a per-mode map."""

    G: float | Mapping[tuple[int, int], float]
    phase: float = 0.0
    readout_loss: float = 1.0

    def __post_init__(self):
        if not 0 < self.readout_loss <= 1:
            raise ValueError("readout_loss must lie in (0, 1]")

    def gain_for(self, mode_id) -> float:
        if isinstance(self.G, Mapping):
            return float(self.G[tuple(mode_id)])
        return float(self.G)


def squeezed_covariance(g: float) -> np.ndarray:
    return np.diag([np.exp(2 * g), np.exp(-2 * g)])


def apply_loss(cov: np.ndarray, eta: float) -> np.ndarray:
    return eta * cov + (1.0 - eta) * np.eye(2)


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def amplifier_symplectic(G: float, phi: float) -> np.ndarray:
    """Amplifies the quadrature at angle phi/2 from p by e^G, de-amplifies its conjugate."""
    r = rotation(phi / 2)
    return r @ np.diag([np.exp(-G), np.exp(G)]) @ r.T


def photon_number(cov: np.ndarray) -> float:
    return float((np.trace(cov) - 2.0) / 4.0)


def cascade_intensity(g_sq: float, G: float, phi: float, eta_mid: float = 1.0) -> float:
    """Mean output photons of squeezer -> loss eta_mid -> MOPA(G, phi) from vacuum."""
    if g_sq < 0 or G < 0:
        raise ValueError("gains must be nonnegative")
    if not 0 < eta_mid <= 1:
        raise ValueError("eta_mid must lie in (0, 1]")
    s = amplifier_symplectic(G, phi)
    cov = s @ apply_loss(squeezed_covariance(g_sq), eta_mid) @ s.T
    return photon_number(cov)


def _scalar_db(g_sq: float, t: float, sign: int) -> float:
    return float(linear_to_db(np.exp(sign * 2 * g_sq) * t + (1.0 - t)))


def detectable_squeezing_db(state: ModeGaussianState) -> float:
    """10 log10(e^{-2 g} T + 1 - T) with T = kappa2 * extra_loss."""
    return _scalar_db(state.g_sq, state.transmission, -1)


def antisqueezing_db(state: ModeGaussianState) -> float:
    return _scalar_db(state.g_sq, state.transmission, +1)


def purity(squeezing_db: float, antisqueezing_db: float, atol: float = 1e-12) -> float:
    """1 / sqrt(V_s V_a) from dB values."""
    prod = float(db_to_linear(squeezing_db) * db_to_linear(antisqueezing_db))
    if prod < 1.0 - atol:
        raise PhysicsError(f"V_s * V_a = {prod:.6g} < 1 violates the uncertainty relation")
    return float(min(1.0, 1.0 / np.sqrt(prod)))


def amplified_variance(state: ModeGaussianState, phi):
    """Input variance of the quadrature the MOPA amplifies at phase(s) phi."""
    cov = state.covariance()
    phi = np.asarray(phi, dtype=float)
    c2, s2 = np.cos(phi / 2) ** 2, np.sin(phi / 2) ** 2
    return c2 * cov[1, 1] + s2 * cov[0, 0]


def exact_trace(state: ModeGaussianState, G: float, phases, readout_loss: float = 1.0) -> np.ndarray:
    """10 log10(I / I_vac) with I from the full symplectic cascade."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    cov_in = state.covariance()
    vac = readout_loss * photon_number(amplifier_symplectic(G, 0.0) @ amplifier_symplectic(G, 0.0).T)
    out = np.empty(phases.size)
    for i, phi in enumerate(phases):
        s = amplifier_symplectic(G, phi)
        out[i] = readout_loss * photon_number(s @ cov_in @ s.T)
    return linear_to_db(out / vac)


def limit_trace(state: ModeGaussianState, phases) -> np.ndarray:
    """Large-gain limit: the trace is the amplified input variance itself."""
    return linear_to_db(amplified_variance(state, np.atleast_1d(phases)))


def finite_gain_deviation(state: ModeGaussianState, G: float, phases) -> float:
    """Max relative deviation in linear variance between exact and limit traces."""
    ex = db_to_linear(exact_trace(state, G, phases))
    lim = db_to_linear(limit_trace(state, phases))
    return float(np.max(np.abs(ex / lim - 1.0)))


def phase_trace(
    states: Sequence[ModeGaussianState], mopa: MopaConfig, phases
) -> dict[tuple[int, int], np.ndarray]:
    """Per-mode readout traces versus MOPA pump phase, in dB relative to vacuum input."""
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if phases.size == 0:
        raise ValueError("need at least one phase sample")
    out = {}
    for st in states:
        G = mopa.gain_for(st.mode_id)
        dev = finite_gain_deviation(st, G, phases)
        if dev > FINITE_GAIN_WARN:
            warnings.warn(
                f"mode {st.mode_id}: finite-gain correction {dev:.2%} exceeds 1% at G = {G:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
        out[tuple(st.mode_id)] = exact_trace(st, G, phases, mopa.readout_loss)
    return out


def gain_band(state: ModeGaussianState, rel_delta: float) -> tuple[float, float]:
    """Detectable squeezing at g_sq * (1 -/+ rel_delta): the shaded-band endpoints."""
    lo = ModeGaussianState(state.mode_id, state.g_sq * (1 - rel_delta), state.kappa2, state.extra_loss)
    hi = ModeGaussianState(state.mode_id, state.g_sq * (1 + rel_delta), state.kappa2, state.extra_loss)
    return detectable_squeezing_db(lo), detectable_squeezing_db(hi)
