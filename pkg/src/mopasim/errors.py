"""Exception hierarchy shared by all modules."""


class MopaSimError(Exception):
    """Base class for library errors."""


class ResolutionError(MopaSimError, ValueError):
    """A feature is too narrow for the sampling grid."""


class AliasingError(MopaSimError, ValueError):
    """A mode order or carrier frequency exceeds what the grid can represent."""


class GridMismatchError(MopaSimError, ValueError):
    """Two objects live on incompatible grids."""


class ConvergenceError(MopaSimError, RuntimeError):
    """A numerical solve failed to meet its accuracy contract."""


class PhysicsError(MopaSimError, ValueError):
    """Inputs or outputs violate a physical constraint (e.g. uncertainty)."""


class ConfigError(MopaSimError, ValueError):
    """Invalid experiment configuration."""


class SpotCollisionError(MopaSimError, ValueError):
    """Multiplexed first-order spots overlap in the Fourier plane."""
