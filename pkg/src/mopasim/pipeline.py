"""End-to-end pipeline: solve -> overlap -> traces -> tomography -> sorter -> clusters.

``Pipeline`` caches every stage so ``all`` computes each kernel once.  The
``run_*`` functions write their outputs into a directory and return a summary.
"""

from __future__ import annotations

import logging
import warnings
from functools import cached_property
from pathlib import Path

import numpy as np

from . import cluster as cl
from . import gaussian as go
from . import io
from . import sorter as so
from . import tomography as tm
from .config import ExperimentConfig
from .errors import ConfigError
from .grids import TransverseGrid
from .pdc import propagate_kernels
from .schmidt import (
    assemble_2d,
    decompose,
    matched_kappa2,
    overlap_matrix_2d,
    schmidt_number,
    schmidt_number_2d,
)

log = logging.getLogger(__name__)

STAGES = ("squeezer", "mopa", "mopa_unmatched")


class Pipeline:
    def __init__(self, config: ExperimentConfig):
        self.config = config

    @cached_property
    def grid(self) -> TransverseGrid:
        g = self.config.grid
        return TransverseGrid(g.n_points, g.extent, self.config.squeezer.signal_wavelength)

    def _stage_config(self, stage: str):
        return getattr(self.config, stage)

    @cached_property
    def kernels(self) -> dict:
        out = {}
        for stage in STAGES:
            log.info("propagating %s kernels", stage)
            out[stage] = propagate_kernels(self._stage_config(stage), self.grid)
        return out

    @cached_property
    def decompositions(self) -> dict:
        return {k: decompose(v) for k, v in self.kernels.items()}

    @property
    def max_order(self) -> int:
        return self.config.analysis.max_order

    def spectrum(self, stage: str, max_order: int | None = None):
        return assemble_2d(self.decompositions[stage], self.max_order if max_order is None else max_order)

    @property
    def mode_ids(self):
        """Analysis modes in descending squeezer gain order."""
        return self.spectrum("squeezer").ordered()

    def kappa2(self, stage: str = "mopa") -> dict:
        return matched_kappa2(self.decompositions["squeezer"], self.decompositions[stage], self.max_order)

    def states(self, stage: str = "mopa") -> list[go.ModeGaussianState]:
        sq = self.spectrum("squeezer").gains
        k2 = self.kappa2(stage)
        return [go.ModeGaussianState(m, sq[m], k2[m]) for m in self.mode_ids]

    def mopa_gains(self, stage: str = "mopa") -> dict:
        return self.spectrum(stage).gains

    def readout(self, stage: str = "mopa") -> dict:
        """Per-mode squeezing, antisqueezing and purity predicted for a MOPA stage."""
        out = {}
        for st in self.states(stage):
            s, a = go.detectable_squeezing_db(st), go.antisqueezing_db(st)
            out[st.mode_id] = {"squeezing_db": s, "antisqueezing_db": a, "purity": go.purity(s, a),
                               "kappa2": st.kappa2, "g_sq": st.g_sq}
        return out


def _label(mid) -> str:
    return io.mode_label(mid)


def run_solve(p: Pipeline, out: Path) -> dict:
    files, summary = [], {}
    for stage in STAGES:
        k, d = p.kernels[stage], p.decompositions[stage]
        if p.config.write_kernels:
            io.write_kernel_text(out / f"{stage}_kernels.txt", k)
            files.append(f"{stage}_kernels.txt")
        io.write_csv(out / f"{stage}_spectrum_1d.csv", ["n", "Lambda", "g"],
                     [(n, float(w), float(g)) for n, (w, g) in enumerate(zip(d.weights, d.gains))])
        rows2d = []
        if d.rank > p.max_order:
            sp = p.spectrum(stage)
            rows2d = [(m, n, sp.gains[(m, n)], sp.weights[(m, n)]) for m, n in sp.indices]
        io.write_csv(out / f"{stage}_spectrum_2d.csv", ["m", "n", "G", "Lambda"], rows2d)
        r = min(d.rank, 8)
        io.write_csv(out / f"{stage}_modes_intensity.csv", ["theta_rad"] + [f"u{n}" for n in range(r)],
                     [[float(t)] + [float(d.output_modes[n].intensity[i]) for n in range(r)]
                      for i, t in enumerate(p.grid.theta)])
        files += [f"{stage}_spectrum_1d.csv", f"{stage}_spectrum_2d.csv", f"{stage}_modes_intensity.csv"]
        entry = {"gain_g": k.gain_g, "peak_gain": k.peak_gain, "rank": d.rank,
                 "symplectic_error": k.symplectic_error(), "symmetry_error": k.symmetry_error()}
        if d.rank:
            entry.update({
                "schmidt_number_1d": schmidt_number(d.weights),
                "schmidt_number_2d": schmidt_number_2d(d),
                "n_modes_99p9": d.n_covering(0.999),
                "fundamental_waist_m": d.fundamental_waist(),
                "degenerate_pairs": int(np.count_nonzero(d.degenerate)) // 2,
            })
        summary[stage] = entry
    io.write_json(out / "schmidt_report.json", summary)
    files.append("schmidt_report.json")
    return {"files": files, "summary": summary}


def run_overlap(p: Pipeline, out: Path) -> dict:
    files, summary = [], {}
    sq = p.decompositions["squeezer"]
    for stage in ("mopa", "mopa_unmatched"):
        idx, K = overlap_matrix_2d(sq, p.decompositions[stage], p.max_order)
        io.write_matrix_csv(out / f"kappa2_{stage}.csv", K, [_label(m) for m in idx])
        files.append(f"kappa2_{stage}.csv")
        summary[stage] = {_label(m): float(K[i, i]) for i, m in enumerate(idx)}
        summary[stage + "_neglected"] = {_label(m): float(K[i].sum() - K[i, i]) for i, m in enumerate(idx)}
    rows = [(_label(m), summary["mopa"][_label(m)], summary["mopa_unmatched"][_label(m)])
            for m in p.mode_ids]
    io.write_csv(out / "overlap_bars.csv", ["mode", "kappa2_matched", "kappa2_unmatched"], rows)
    files.append("overlap_bars.csv")
    io.write_json(out / "overlap_report.json", summary)
    files.append("overlap_report.json")
    return {"files": files, "summary": summary}


def witness_traces(p: Pipeline, phases: np.ndarray, stage: str = "mopa") -> dict:
    """Nullifier and witness traces of the two-node presets versus MOPA phase."""
    sq = p.spectrum("squeezer", max(2, p.max_order)).gains
    decs = p.decompositions
    G = p.spectrum(stage, max(2, p.max_order)).gains
    out = {}
    for name in p.config.cluster.two_node:
        topo = cl.TWO_NODE_PRESETS[name]
        variances = []
        for mid in topo.node_mode_map:
            k2 = matched_kappa2(decs["squeezer"], decs[stage], max(2, p.max_order))[mid]
            st = go.ModeGaussianState(mid, sq[mid], k2)
            variances.append(go.db_to_linear(go.exact_trace(st, G[mid], phases)))
        # two-node nullifiers reduce to the p-quadrature of one squeezed mode each
        ns = [cl.nullifier_variances(topo, np.array([v1, v2])).variances for v1, v2 in zip(*variances)]
        ns = np.array(ns)
        W, flag = cl.two_node_witness(ns[:, 0], ns[:, 1], p.config.cluster.threshold)
        out[name] = {"delta1": ns[:, 0], "delta2": ns[:, 1], "W": W, "entangled": flag}
    return out


def run_trace(p: Pipeline, out: Path) -> dict:
    files, summary = [], {}
    phases = np.linspace(-np.pi, np.pi, p.config.analysis.n_phases)
    for stage in ("mopa", "mopa_unmatched"):
        mopa = go.MopaConfig(p.mopa_gains(stage))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            traces = go.phase_trace(p.states(stage), mopa, phases)
        rows = [(float(ph), m, n, float(tr[i])) for (m, n), tr in traces.items() for i, ph in enumerate(phases)]
        io.write_csv(out / f"traces_{stage}.csv", ["phase_rad", "mode_m", "mode_n", "dB"], rows)
        files.append(f"traces_{stage}.csv")
        rd = p.readout(stage)
        entry = {}
        for st in p.states(stage):
            r = rd[st.mode_id]
            band = go.gain_band(st, p.config.analysis.gain_band / p.config.squeezer.gain_g)
            entry[_label(st.mode_id)] = {
                **{k: float(v) for k, v in r.items()},
                "trace_min_db": float(traces[st.mode_id].min()),
                "trace_max_db": float(traces[st.mode_id].max()),
                "finite_gain_deviation": go.finite_gain_deviation(st, mopa.gain_for(st.mode_id), phases),
                "band_db": [float(band[1]), float(band[0])],
            }
        summary[stage] = entry
    wt = witness_traces(p, phases)
    rows = []
    for name, d in wt.items():
        for i, ph in enumerate(phases):
            rows.append((name, float(ph), float(d["delta1"][i]), float(d["delta2"][i]), float(d["W"][i]), int(d["entangled"][i])))
    io.write_csv(out / "witness_traces.csv", ["cluster", "phase_rad", "var_delta1", "var_delta2", "W", "entangled"], rows)
    files.append("witness_traces.csv")
    summary["witness"] = {name: {"min_W": float(d["W"].min()), "max_W": float(d["W"].max()),
                                 "entangled_fraction": float(np.mean(d["entangled"]))} for name, d in wt.items()}
    io.write_json(out / "trace_summary.json", summary)
    files.append("trace_summary.json")
    return {"files": files, "summary": summary}


def run_tomography(p: Pipeline, out: Path) -> dict:
    t = p.config.tomography
    dec = p.decompositions["mopa"]
    spec = p.spectrum("mopa", t.spectrum_order)
    ens = tm.simulate_frames(spec, t.n_frames, p.config.seed, t.noise_std, t.half_plane)
    n_save = min(t.save_frames, t.n_frames)
    files = []
    if n_save > 0:
        io.write_frames(out / "frames.bin", ens.frames(), n_save, p.grid)
        files.append("frames.bin")
    cs = tm.covariance_slice(ens, t.theta_y_index)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        modes, weights = tm.reconstruct_modes(cs, t.n_modes, t.strategy, t.n_sigma, t.smoothing, t.parity)
    truth = dec.output_modes[: t.n_modes]
    fid = tm.fidelities(modes, truth)
    io.write_csv(out / "reconstructed_modes.csv",
                 ["theta_rad"] + [f"rec{m}" for m in range(t.n_modes)],
                 [[float(th)] + [float(md.samples[i].real) for md in modes] for i, th in enumerate(p.grid.theta)])
    files.append("reconstructed_modes.csv")
    summary = {
        "n_frames": t.n_frames,
        "strategy": t.strategy,
        "fidelity": fid,
        "weights_rel": weights / weights[0],
        "truth_weights_rel": (lambda w: w[: t.n_modes] / w[0])(ens.slice_weights(cs.theta_y_index)),
        "warnings": [str(w.message) for w in caught],
    }
    io.write_json(out / "tomography_report.json", summary)
    files.append("tomography_report.json")
    return {"files": files, "summary": summary}


def run_sorter(p: Pipeline, out: Path) -> dict:
    s = p.config.sorter
    slm = so.SLMGrid(s.nx, s.ny, s.pitch)
    modes = so.DEFAULT_MODES
    carriers = so.grid_carriers(3, 3, s.carrier_spacing, tuple(s.carrier_center))
    targets = [so.hg_target(m, n, slm, s.fwhm) for m, n in modes]
    holos = [so.synthesize_hologram(t, c, slm, mid, s.bessel_constant) for t, c, mid in zip(targets, carriers, modes)]
    h = so.multiplex(holos, s.window_bins)
    files = []
    io.write_pgm(out / "hologram_multiplexed.pgm", h.phase)
    files.append("hologram_multiplexed.pgm")
    for mid, hol in zip(modes, holos):
        io.write_pgm(out / f"hologram_{_label(mid)}.pgm", hol.phase)
        files.append(f"hologram_{_label(mid)}.pgm")
    X = so.crosstalk_matrix(targets, h, s.pad, s.window_bins)
    io.write_matrix_csv(out / "crosstalk.csv", X, [_label(m) for m in modes])
    files.append("crosstalk.csv")
    reports = [so.simulate_sorting(t, h, s.pad, s.window_bins) for t in targets]
    summary = {
        "carriers": carriers,
        "dominance_db": so.dominance_db(X),
        "efficiency": [r.efficiency for r in reports],
        "zeta_diag": [r.weights[m] for r, m in zip(reports, modes)],
        "energy_error": max(abs(r.total_power - r.input_power) / r.input_power for r in reports),
    }
    io.write_json(out / "sorter_report.json", summary)
    files.append("sorter_report.json")
    return {"files": files, "summary": summary}


def cluster_report(p: Pipeline, stage: str = "mopa") -> dict:
    c = p.config.cluster
    order = max(2, p.max_order)
    sq = p.spectrum("squeezer", order).gains
    k2 = matched_kappa2(p.decompositions["squeezer"], p.decompositions[stage], order)

    def pvar(mid):
        return float(go.db_to_linear(go.detectable_squeezing_db(go.ModeGaussianState(mid, sq[mid], k2[mid]))))

    topos = [cl.PRESETS[name] for name in c.presets] + [cl.TWO_NODE_PRESETS[name] for name in c.two_node]
    if c.edges:
        n = len(c.node_modes)
        topos.append(cl.ClusterTopology.from_edges(n, [tuple(e) for e in c.edges], c.node_modes, "custom"))
    out = {}
    for topo in topos:
        if any(max(m) > order for m in topo.node_mode_map):
            raise ConfigError(f"cluster {topo.name} needs modes beyond order {order}")
        pv = np.array([pvar(m) for m in topo.node_mode_map])
        ns = cl.nullifier_variances(topo, pv)
        entry = {
            "nodes": [_label(m) for m in topo.node_mode_map],
            "adjacency": topo.adjacency.astype(int),
            "weights": ns.weights,
            "p_variances_db": go.linear_to_db(pv),
            "nullifier_db": ns.variances_db,
        }
        if topo.n_nodes == 2:
            W, ent = cl.two_node_witness(*ns.variances, threshold=c.threshold)
            entry["witness"] = {"W": W, "entangled": ent}
        out[topo.name] = entry
    return out


def run_cluster(p: Pipeline, out: Path) -> dict:
    summary = cluster_report(p)
    io.write_json(out / "cluster_report.json", summary)
    return {"files": ["cluster_report.json"], "summary": summary}


COMMANDS = {
    "solve": run_solve,
    "overlap": run_overlap,
    "trace": run_trace,
    "tomography": run_tomography,
    "sorter": run_sorter,
    "cluster": run_cluster,
}
