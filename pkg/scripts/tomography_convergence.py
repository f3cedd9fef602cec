"""Reconstruction error of the first four MOPA modes versus the number of frames.

Usage: python scripts/tomography_convergence.py [--seeds 5] [--strategy sqrt-sign]
"""

import argparse
import warnings

import numpy as np

from mopasim.config import config_from_dict
from mopasim.pipeline import Pipeline
from mopasim import tomography as tm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--strategy", default="sqrt-sign", choices=("sqrt-sign", "direct"))
    args = ap.parse_args()
    p = Pipeline(config_from_dict({}))
    spec = p.spectrum("mopa", 12)
    truth = p.decompositions["mopa"].output_modes[:4]
    print("frames  median(1 - mean fidelity)  worst mode fidelity")
    for n in (100, 200, 400, 800, 1250, 1600, 3200):
        errs, worst = [], 1.0
        for seed in range(args.seeds):
            ens = tm.simulate_frames(spec, n, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                modes, _ = tm.reconstruct_modes(tm.covariance_slice(ens), 4, strategy=args.strategy)
            f = tm.fidelities(modes, truth)
            errs.append(1 - f.mean())
            worst = min(worst, f.min())
        print(f"{n:6d}  {np.median(errs):.4f}                     {worst:.4f}")


if __name__ == "__main__":
    main()
