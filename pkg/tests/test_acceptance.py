"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import filecmp
import time
import warnings

import numpy as np
import pytest
import yaml

from conftest import record_criterion
from mopasim import cli
from mopasim import cluster as cl
from mopasim import gaussian as go
from mopasim import sorter as so
from mopasim import tomography as tm
from mopasim.grids import TransverseGrid
from mopasim.pdc import CrystalConfig, first_order_kernel, propagate_kernels
from mopasim.schmidt import assemble_2d, decompose, schmidt_number_2d
from mopasim.pipeline import cluster_report, witness_traces


def check(n, ok, detail):
    record_criterion(n, ok, detail)
    assert ok, f"criterion {n}: {detail}"


def test_criterion_01_symplectic_invariants():
    grid = TransverseGrid()
    worst, slowest = 0.0, 0.0
    for g in (0.25, 1.05, 4.4):
        t0 = time.perf_counter()
        k = propagate_kernels(CrystalConfig(gain_g=g), grid)
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, k.symplectic_error(), k.symmetry_error())
    check(1, worst < 1e-6 and slowest < 60, f"max invariant deviation {worst:.2e}, slowest solve {slowest:.1f} s")


def test_criterion_02_perturbative_oracle(grid):
    cfg = CrystalConfig(gain_g=0.01)
    k = propagate_kernels(cfg, grid)
    ref = first_order_kernel(cfg, grid, k.peak_gain)
    err = np.linalg.norm(k.beta - ref) / np.linalg.norm(ref)
    check(2, err < 0.01, f"relative L2 error vs first-order kernel {err:.2e}")


def test_criterion_03_mode_count(decomps):
    K = schmidt_number_2d(decomps["squeezer"])
    check(3, 40 <= K <= 70, f"2D Schmidt number {K:.1f}")


def test_criterion_04_fundamental_waist(decomps):
    w = decomps["squeezer"].fundamental_waist() * 1e6
    check(4, 18 <= w <= 28, f"fundamental waist {w:.2f} um")


def test_criterion_05_overlaps(pipeline):
    k2 = pipeline.kappa2("mopa")
    unm = pipeline.kappa2("mopa_unmatched")
    order = pipeline.mode_ids
    first, rest = order[:3], order[3:8]
    ok = all(k2[m] > 0.80 for m in first) and all(k2[m] > 0.60 for m in rest)
    drop = k2[(2, 2)] - unm[(2, 2)]
    ok = ok and drop >= 0.15 and set(first) == {(0, 0), (0, 1), (1, 0)}
    detail = (f"matched min(first three) {min(k2[m] for m in first):.3f}, min(next five) "
              f"{min(k2[m] for m in rest):.3f}; HG22 matched {k2[(2, 2)]:.3f} vs unmatched {unm[(2, 2)]:.3f}")
    check(5, ok, detail)


def test_criterion_06_squeezing_readout(pipeline):
    m = pipeline.readout("mopa")
    u = pipeline.readout("mopa_unmatched")
    sq, asq = m[(0, 0)]["squeezing_db"], m[(0, 0)]["antisqueezing_db"]
    deficit = min(u[k]["squeezing_db"] - m[k]["squeezing_db"] for k in m)
    ok = -8.8 <= sq <= -7.0 and 9.0 <= asq <= 11.0 and deficit >= 1.5
    check(6, ok, f"HG00 {sq:.2f} / +{asq:.2f} dB; smallest unmatched deficit {deficit:.3f} dB")


def test_criterion_07_purity(pipeline):
    r = pipeline.readout("mopa")
    p = {k: v["purity"] for k, v in r.items()}
    ok = all(0.55 <= v <= 0.85 for v in p.values()) and p[(0, 0)] >= 0.74
    check(7, ok, f"purities {min(p.values()):.3f}..{max(p.values()):.3f}, HG00 {p[(0, 0)]:.3f}")


def test_criterion_08_finite_gain(pipeline):
    phases = np.linspace(-np.pi, np.pi, 721)
    dev = max(go.finite_gain_deviation(st, 4.4, phases) for st in pipeline.states("mopa"))
    check(8, dev < 0.01, f"max exact vs limit deviation at G = 4.4: {dev:.2e}")


def test_criterion_09_loss_tolerance(pipeline):
    phases = np.linspace(-np.pi, np.pi, 721)
    G = pipeline.mopa_gains("mopa")
    worst = 0.0
    for st in pipeline.states("mopa"):
        ref = go.exact_trace(st, G[st.mode_id], phases, 1.0)
        for eta in (0.1, 0.003):
            worst = max(worst, np.abs(go.exact_trace(st, G[st.mode_id], phases, eta) - ref).max())
    check(9, worst < 1e-10, f"max trace change under readout loss {worst:.1e} dB")


def _frame_error(spec, truth, n_frames, seed):
    ens = tm.simulate_frames(spec, n_frames, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        modes, _ = tm.reconstruct_modes(tm.covariance_slice(ens), 4)
    return 1.0 - tm.fidelities(modes, truth).mean()


def test_criterion_10_tomography(pipeline):
    spec = pipeline.spectrum("mopa", 12)
    truth = pipeline.decompositions["mopa"].output_modes[:4]
    t0 = time.perf_counter()
    ens = tm.simulate_frames(spec, 1250, pipeline.config.seed)
    modes, _ = tm.reconstruct_modes(tm.covariance_slice(ens), 4)
    fid = tm.fidelities(modes, truth)
    runtime = time.perf_counter() - t0
    counts = (100, 200, 400, 800, 1600)
    medians = [np.median([_frame_error(spec, truth, n, s) for s in range(5)]) for n in counts]
    # within noise: no doubling may raise the median error by more than 20%, and the
    # overall reduction over a 16x increase in frames must be substantial
    trend = all(b <= 1.2 * a for a, b in zip(medians, medians[1:])) and medians[-1] < 0.25 * medians[0]
    ok = np.all(fid > 0.95) and trend and runtime < 300
    check(10, ok, f"fidelities {np.round(fid, 4).tolist()}, median errors {np.round(medians, 4).tolist()}, "
                  f"runtime {runtime:.1f} s")


def _j1_reference(x):
    """J1 by its integral representation (1/pi) int_0^pi cos(t - x sin t) dt with composite Simpson."""
    t = np.linspace(0, np.pi, 2001)
    y = np.cos(t[None, :] - np.asarray(x)[:, None] * np.sin(t[None, :]))
    h = t[1] - t[0]
    return h / 3 * (y[:, 0] + y[:, -1] + 4 * y[:, 1:-1:2].sum(axis=1) + 2 * y[:, 2:-1:2].sum(axis=1)) / np.pi


def test_criterion_11_bessel_inversion():
    A = np.linspace(0, 1, 1001)
    f = so.bessel_amplitude_map(A, 0.58)
    err = np.abs(_j1_reference(f) - 0.58 * A).max()
    check(11, err < 1e-9, f"max |J1(f(A)) - 0.58 A| = {err:.1e}")


@pytest.fixture(scope="module")
def sorter_run():
    targets, h = so.nine_mode_sorter()
    X = so.crosstalk_matrix(targets, h)
    reports = [so.simulate_sorting(t, h) for t in targets]
    return targets, h, X, reports


def test_criterion_12_sorter(sorter_run):
    targets, h, X, reports = sorter_run
    dom = so.dominance_db(X)
    energy = max(abs(r.total_power - r.input_power) / r.input_power for r in reports)
    eff = np.array([r.efficiency for r in reports])
    ok = np.all(dom >= 10) and energy < 1e-9 and np.all((eff >= 1e-3) & (eff <= 5e-2))
    check(12, ok, f"dominance {dom.min():.1f}..{dom.max():.1f} dB, energy error {energy:.1e}, "
                  f"efficiency {100 * eff.min():.3f}..{100 * eff.max():.3f} %")


def test_criterion_13_cluster_algebra():
    two = cl.nullifier_variances(cl.TWO_NODE_PRESETS["11-00"], np.array([0.3, 0.7])).variances
    ok_two = np.array_equal(two, [0.3, 0.7]) or np.abs(two - [0.3, 0.7]).max() < 1e-15
    w = cl.nullifier_weights(cl.A3)
    ok_three = abs(w[0, 0] - 0.949967) < 1e-6 and abs(w[0, 1] - 0.0250165) < 1e-6
    rng = np.random.default_rng(0)
    worst = 0.0
    mats = [cl.A3, cl.A4, cl.A5]
    for _ in range(100):
        n = int(rng.integers(2, 9))
        A = np.triu(rng.integers(0, 2, (n, n)), 1)
        mats.append(A + A.T)
    for A in mats:
        U = cl.quadrature_unitary(A)
        worst = max(worst, np.abs(U @ U.T - np.eye(len(U))).max())
    check(13, ok_two and ok_three and worst < 1e-10,
          f"two-node exact {ok_two}, triangle weights {w[0, 0]:.7f} / {w[0, 1]:.7f}, max |UU^T - I| {worst:.1e}")


def test_criterion_14_witness_and_nullifiers(pipeline):
    phases = np.linspace(-np.pi, np.pi, 721)
    wt = witness_traces(pipeline, phases)
    squeezed = np.abs(phases) < 0.05
    anti = np.abs(np.abs(phases) - np.pi) < 0.05
    ok_w = all(np.all(d["W"][squeezed] < 2) and np.all(d["W"][anti] > 2) for d in wt.values())
    rep = cluster_report(pipeline)
    vals = np.concatenate([rep[name]["nullifier_db"] for name in ("three-node", "four-node", "five-node")])
    ok_n = bool(np.all((vals >= -7.9) & (vals <= -5.5)))
    detail = (f"witness dips/returns {ok_w}; predicted nullifiers {vals.min():.2f}..{vals.max():.2f} dB "
              f"(target -7.9..-5.5)")
    check(14, ok_w and ok_n, detail)


FAST = {
    "grid": {"n_points": 256, "extent": 0.025},
    "squeezer": {"n_slices": 32},
    "mopa": {"n_slices": 32},
    "mopa_unmatched": {"n_slices": 32},
    "tomography": {"n_frames": 200, "save_frames": 4},
    "sorter": {"nx": 396, "ny": 300, "carrier_spacing": 30, "carrier_center": [100, 75], "fwhm": 0.000625},
}


def test_criterion_15_determinism(tmp_path):
    cfg = tmp_path / "fast.yaml"
    cfg.write_text(yaml.safe_dump(FAST))
    # same output path for both runs (it is recorded in config.yaml and the manifests)
    run_dir = tmp_path / "out"
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = []
    for o in outs:
        codes.append(cli.main(["all", "--config", str(cfg), "--seed", "7", "--out", str(run_dir)]))
        run_dir.rename(o)
    names = sorted(p.name for p in outs[0].iterdir())
    same_names = names == sorted(p.name for p in outs[1].iterdir())
    match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    ok = codes == [0, 0] and same_names and not mismatch and not errors and len(match) == len(names)
    check(15, ok, f"{len(match)}/{len(names)} files byte-identical, exit codes {codes}")
