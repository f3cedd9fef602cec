"""Experiment configuration: nested dataclasses with YAML round-tripping."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .pdc import CrystalConfig


@dataclass(frozen=True)
class GridConfig:
    n_points: int = 320
    extent: float = 30e-3


@dataclass(frozen=True)
class AnalysisConfig:
    """Mode range for overlaps, traces and purities (max_order 2 -> nine HG modes)."""

    max_order: int = 2
    n_phases: int = 721
    gain_band: float = 0.2
    mopa_gain_band: float = 0.3


@dataclass(frozen=True)
class TomographyConfig:
    n_frames: int = 1250
    n_modes: int = 4
    strategy: str = "sqrt-sign"
    spectrum_order: int = 12
    theta_y_index: int | None = None
    n_sigma: float = 3.0
    smoothing: float = 1e-3
    parity: bool = True
    noise_std: float = 0.0
    half_plane: str | None = None
    save_frames: int = 8


@dataclass(frozen=True)
class SorterConfig:
    nx: int = 792
    ny: int = 600
    pitch: float = 20e-6
    fwhm: float = 1.25e-3
    carrier_spacing: int = 60
    carrier_center: tuple = (200, 150)
    window_bins: float = 2.25
    pad: int = 4
    bessel_constant: float = 0.58


@dataclass(frozen=True)
class ClusterConfig:
    presets: tuple = ("three-node", "four-node", "five-node")
    two_node: tuple = ("lg-01-10", "11-00", "22-11")
    threshold: float = 2.0
    edges: tuple = ()
    node_modes: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    squeezer: CrystalConfig = field(default_factory=lambda: CrystalConfig(pump_waist=97e-6, gain_g=1.05))
    mopa: CrystalConfig = field(default_factory=lambda: CrystalConfig(pump_waist=145e-6, gain_g=4.4))
    mopa_unmatched: CrystalConfig = field(default_factory=lambda: CrystalConfig(pump_waist=97e-6, gain_g=4.4))
    grid: GridConfig = field(default_factory=GridConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    tomography: TomographyConfig = field(default_factory=TomographyConfig)
    sorter: SorterConfig = field(default_factory=SorterConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    seed: int = 0
    output_dir: str = "out"
    write_kernels: bool = True

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def digest(self) -> str:
        return hashlib.sha256(self.to_yaml().encode()).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, path="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{path}.{name}")
        elif isinstance(default, tuple):
            kwargs[name] = tuple(tuple(v) if isinstance(v, list) else v for v in (value or ()))
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict | None) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data or {})
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(data)


def validate(cfg: ExperimentConfig) -> None:
    g = cfg.grid
    if not (isinstance(g.n_points, int) and g.n_points >= 16 and g.n_points % 2 == 0):
        raise ConfigError("grid.n_points must be an even integer >= 16")
    if not g.extent > 0:
        raise ConfigError("grid.extent must be positive")
    wl = {c.pump_wavelength for c in (cfg.squeezer, cfg.mopa, cfg.mopa_unmatched)}
    if len(wl) != 1:
        raise ConfigError("all stages must share one pump wavelength")
    t = cfg.tomography
    if t.n_frames < 2 or t.n_modes < 1 or t.spectrum_order < t.n_modes:
        raise ConfigError("invalid tomography settings")
    if t.strategy not in ("sqrt-sign", "direct"):
        raise ConfigError(f"unknown tomography strategy {t.strategy!r}")
    if cfg.analysis.max_order < 0 or cfg.analysis.n_phases < 1:
        raise ConfigError("invalid analysis settings")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg.cluster.threshold <= 0:
        raise ConfigError("cluster.threshold must be positive")
