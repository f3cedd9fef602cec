"""Desk-scale simulation of MOPA-based multimode squeezing detection.

Modules:
    grids: transverse grids and Hermite-Gauss / Laguerre-Gauss modes.
    pdc: Bogoliubov kernels of high-gain parametric down-conversion.
    schmidt: Schmidt modes, gains and the factorized 2D spectrum.
    gaussian: squeezer -> MOPA cascade, readout traces, purity.
    tomography: thermal frames and covariance-based mode reconstruction.
    sorter: multiplexed phase-only holograms for mode sorting.
    cluster: cluster-state nullifiers and witnesses.
"""

__version__ = "0.1.0"
