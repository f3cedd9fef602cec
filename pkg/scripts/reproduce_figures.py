"""Print the numbers behind the overlap, squeezing, purity, witness and cluster figures.

Usage: python scripts/reproduce_figures.py [--config cfg.yaml]
"""

import argparse

import numpy as np

from mopasim.config import config_from_dict, load_config
from mopasim.io import mode_label
from mopasim.pipeline import Pipeline, cluster_report, witness_traces
from mopasim.schmidt import schmidt_number_2d


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else config_from_dict({})
    p = Pipeline(cfg)

    d = p.decompositions["squeezer"]
    print(f"squeezer: 2D Schmidt number {schmidt_number_2d(d):.1f}, fundamental waist {d.fundamental_waist() * 1e6:.2f} um")

    matched, unmatched = p.readout("mopa"), p.readout("mopa_unmatched")
    print("\nmode   kappa2(m)  kappa2(u)  sq(m) dB  asq(m) dB  purity   sq(u) dB")
    for mid in p.mode_ids:
        m, u = matched[mid], unmatched[mid]
        print(f"{mode_label(mid)}   {m['kappa2']:.3f}      {u['kappa2']:.3f}      {m['squeezing_db']:6.2f}    "
              f"{m['antisqueezing_db']:5.2f}     {m['purity']:.3f}    {u['squeezing_db']:6.2f}")

    phases = np.linspace(-np.pi, np.pi, cfg.analysis.n_phases)
    print("\ntwo-node witness W = Var(d1) + Var(d2) over the phase scan")
    for name, w in witness_traces(p, phases).items():
        print(f"  {name:9s} min {w['W'].min():.3f}  max {w['W'].max():.2f}  entangled fraction {w['entangled'].mean():.3f}")

    print("\nexpected nullifier squeezing (dB)")
    for name, entry in cluster_report(p).items():
        if len(entry["nodes"]) > 2:
            print(f"  {name:10s} {np.round(entry['nullifier_db'], 2).tolist()}")


if __name__ == "__main__":
    main()
