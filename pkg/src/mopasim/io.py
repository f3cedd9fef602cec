"""File formats: text matrices, kernel dumps, frame containers, PGM, CSV and JSON."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grids import ModeFunction1D, ModeFunction2D, TransverseGrid

FRAME_MAGIC = b"MPSF"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<4sIIId")  # magic, version, n_frames, n_points, extent


def _fmt(x: float) -> str:
    return repr(float(x))


def _grid_header(grid: TransverseGrid) -> list[str]:
    return [
        f"# n_points {grid.n_points}",
        f"# extent {_fmt(grid.extent)}",
        f"# wavelength {_fmt(grid.wavelength)}",
    ]


def _matrix_lines(m: np.ndarray) -> list[str]:
    m = np.atleast_2d(m)
    return [" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row) for row in m]


def _parse_header(lines) -> tuple[TransverseGrid, int]:
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, val = lines[i][1:].split(None, 1)
        meta[key] = val.strip()
        i += 1
    grid = TransverseGrid(int(meta["n_points"]), float(meta["extent"]), float(meta["wavelength"]))
    return grid, i


def _parse_rows(lines) -> np.ndarray:
    rows = []
    for ln in lines:
        vals = np.array(ln.split(), dtype=float)
        rows.append(vals[0::2] + 1j * vals[1::2])
    return np.array(rows)


def write_mode_text(path, mode) -> None:
    """Mode as text: grid header, then one 're im' pair per sample (rows of pairs for 2D)."""
    lines = _grid_header(mode.grid)
    if isinstance(mode, ModeFunction2D):
        lines.append("# dims 2")
        lines += _matrix_lines(mode.samples)
    else:
        lines.append("# dims 1")
        lines += [f"{_fmt(z.real)} {_fmt(z.imag)}" for z in mode.samples]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mode_text(path):
    lines = Path(path).read_text().splitlines()
    grid, i = _parse_header(lines)
    dims = int(next(ln.split()[2] for ln in lines[:i] if ln.startswith("# dims")))
    data = _parse_rows(lines[i:])
    if dims == 1:
        return ModeFunction1D(data[:, 0], grid, normalize=False)
    return ModeFunction2D(data, grid, normalize=False)


def write_kernel_text(path, kernel) -> None:
    """Both kernels in one file under 'ETA' and 'BETA' section headers."""
    lines = _grid_header(kernel.grid)
    lines.append(f"# gain_g {_fmt(kernel.gain_g)}")
    lines.append(f"# peak_gain {_fmt(kernel.peak_gain)}")
    lines.append("ETA")
    lines += _matrix_lines(kernel.eta)
    lines.append("BETA")
    lines += _matrix_lines(kernel.beta)
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel_text(path):
    from .pdc import BogoliubovKernel

    lines = Path(path).read_text().splitlines()
    grid, i = _parse_header(lines)
    meta = dict(ln[1:].split(None, 1) for ln in lines[:i])
    j_eta = lines.index("ETA")
    j_beta = lines.index("BETA")
    eta = _parse_rows(lines[j_eta + 1 : j_beta])
    beta = _parse_rows(lines[j_beta + 1 :])
    return BogoliubovKernel(eta, beta, grid, float(meta["gain_g"]), float(meta["peak_gain"]))


def write_frames(path, frames: Iterable[np.ndarray], n_frames: int, grid: TransverseGrid) -> None:
    """Binary container: little-endian header then row-major float32 frames."""
    with open(path, "wb") as fh:
        fh.write(_FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, n_frames, grid.n_points, grid.extent))
        count = 0
        for f in frames:
            if count == n_frames:
                break
            arr = np.asarray(f, dtype="<f4")
            if arr.shape != (grid.n_points, grid.n_points):
                raise ValueError("frame shape does not match grid")
            fh.write(arr.tobytes(order="C"))
            count += 1
    if count != n_frames:
        raise ValueError(f"expected {n_frames} frames, got {count}")


def read_frames(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, version, n_frames, n_points, extent = _FRAME_HEADER.unpack_from(raw)
    if magic != FRAME_MAGIC:
        raise ValueError("not a frame container")
    if version != FRAME_VERSION:
        raise ValueError(f"unsupported frame container version {version}")
    data = np.frombuffer(raw, dtype="<f4", offset=_FRAME_HEADER.size)
    frames = data.reshape(n_frames, n_points, n_points)
    return {"n_frames": n_frames, "n_points": n_points, "extent": extent, "version": version}, frames


def phase_to_gray(phase: np.ndarray) -> np.ndarray:
    """Linear map [-pi, pi] -> [0, 255]."""
    p = np.clip(np.asarray(phase, dtype=float), -np.pi, np.pi)
    return np.round((p + np.pi) / (2 * np.pi) * 255).astype(np.uint8)


def write_pgm(path, phase: np.ndarray) -> None:
    """8-bit binary portable graymap (P5) of a phase pattern."""
    gray = phase_to_gray(phase)
    ny, nx = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(gray.tobytes(order="C"))


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_matrix_csv(path, M: np.ndarray, labels: Sequence[str] | None = None) -> None:
    M = np.asarray(M, dtype=float)
    if labels is None:
        write_csv(path, [f"c{j}" for j in range(M.shape[1])], M.tolist())
    else:
        write_csv(path, ["mode"] + list(labels), [[lab] + row for lab, row in zip(labels, M.tolist())])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def mode_label(mid) -> str:
    return f"HG{mid[0]}{mid[1]}"
