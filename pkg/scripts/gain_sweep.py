"""Schmidt number and fundamental-mode width of the squeezer versus parametric gain.

Usage: python scripts/gain_sweep.py
"""

import numpy as np

from mopasim.grids import TransverseGrid
from mopasim.pdc import CrystalConfig, propagate_kernels
from mopasim.schmidt import decompose, schmidt_number, schmidt_number_2d


def main():
    grid = TransverseGrid()
    print("gain   peak_gain  K_1D    K_2D    width_mrad  waist_um  modes_99.9%")
    for g in (0.01, 0.25, 0.5, 1.05, 2.0, 3.0, 4.4):
        k = propagate_kernels(CrystalConfig(gain_g=g), grid)
        d = decompose(k)
        print(f"{g:5.2f}  {k.peak_gain:8.4f}  {schmidt_number(d.weights):6.2f}  {schmidt_number_2d(d):6.1f}  "
              f"{d.fundamental_angular_width() * 1e3:9.3f}  {d.fundamental_waist() * 1e6:8.2f}  {d.n_covering(0.999):5d}")


if __name__ == "__main__":
    main()
