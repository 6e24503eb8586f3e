"""On-disk formats: binary field snapshots and CSV series.

Snapshot layout (little-endian):

    bytes 0..7    magic b"STEPFLOW"
    bytes 8..11   uint32 length of the JSON header
    header        UTF-8 JSON: format version, grid dims and steps, geometry,
                  time stamp, config hash, kind ("instant" or "average")
                  plus kind-specific extras
    payload       ux, uy, p arrays in that order, row-major float64

Field values round-trip bit-exactly; CSV floats are written with shortest
round-trip precision so re-reading reproduces the same doubles.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .diagnostics import AveragedField, ProbeSeries
from .errors import StepflowError
from .geometry import UniformGrid
from .solver import FlowState

MAGIC = b"STEPFLOW"
FORMAT_VERSION = 1


class SnapshotFormatError(StepflowError):
    pass


def _grid_meta(grid: UniformGrid) -> dict:
    g = grid.geometry
    return {
        "ny": grid.ny, "nx": grid.nx, "hx": grid.hx, "hy": grid.hy,
        "h_over_H": g.step_height_ratio, "L": g.channel_length,
        "step_x": g.step_x,
    }


def write_snapshot(path, ux, uy, p, grid: UniformGrid, t: float,
                   config_hash: str = "", kind: str = "instant",
                   extra: dict | None = None):
    meta = {"version": FORMAT_VERSION, "kind": kind, "t": t,
            "config_hash": config_hash}
    meta.update(_grid_meta(grid))
    if extra:
        meta.update(extra)
    header = json.dumps(meta, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in (ux, uy, p):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def write_state_snapshot(path, state: FlowState, grid: UniformGrid,
                         config_hash: str = ""):
    write_snapshot(path, state.ux, state.uy, state.p, grid, state.t,
                   config_hash)


def write_average_snapshot(path, avg: AveragedField, grid: UniformGrid,
                           config_hash: str = ""):
    write_snapshot(path, avg.ux_av, avg.uy_av, avg.p_av, grid, avg.t2,
                   config_hash, kind="average",
                   extra={"t1": avg.t1, "t2": avg.t2, "n_frames": avg.n_frames})


def read_snapshot(path):
    """Returns (meta, ux, uy, p); validates magic and payload size."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise SnapshotFormatError(f"{path}: not a stepflow snapshot")
    (hlen,) = struct.unpack("<I", blob[8:12])
    meta = json.loads(blob[12:12 + hlen].decode())
    ny, nx = meta["ny"], meta["nx"]
    payload = blob[12 + hlen:]
    expected = 3 * ny * nx * 8
    if len(payload) != expected:
        raise SnapshotFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for a {ny} x {nx} grid"
        )
    fields = []
    for n in range(3):
        arr = np.frombuffer(payload[n * ny * nx * 8:(n + 1) * ny * nx * 8],
                            dtype="<f8").reshape(ny, nx).copy()
        fields.append(arr)
    return meta, fields[0], fields[1], fields[2]


def read_average_snapshot(path) -> tuple[dict, AveragedField]:
    meta, ux, uy, p = read_snapshot(path)
    if meta.get("kind") != "average":
        raise SnapshotFormatError(f"{path}: snapshot is not an averaged field")
    avg = AveragedField(t1=meta["t1"], t2=meta["t2"],
                        n_frames=meta["n_frames"], ux_av=ux, uy_av=uy, p_av=p)
    return meta, avg


# --- CSV ------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Returns (header, list of string-tuples); validates rectangularity."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise StepflowError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = []
    for n, ln in enumerate(lines[1:], start=2):
        row = ln.split(",")
        if len(row) != len(header):
            raise StepflowError(
                f"{path}:{n}: row has {len(row)} fields, header has {len(header)}"
            )
        rows.append(tuple(row))
    return header, rows


def write_probe_csv(path, series: ProbeSeries):
    write_csv(path, ["t", "ux", "uy"],
              zip(series.t, series.ux, series.uy))


def read_probe_csv(path, location=(float("nan"), float("nan"))) -> ProbeSeries:
    header, rows = read_csv(path)
    if header != ["t", "ux", "uy"]:
        raise StepflowError(f"{path}: expected header t,ux,uy, got {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    t = data[:, 0]
    interval = float(np.median(np.diff(t))) if t.size >= 2 else 0.0
    return ProbeSeries(location=tuple(location), t=t, ux=data[:, 1],
                       uy=data[:, 2], sample_interval=interval)


def write_spectrum_csv(path, spectrum):
    reliable = spectrum.reliable()
    write_csv(path, ["k", "E", "reliable"],
              ((int(k), e, int(r)) for k, e, r in
               zip(spectrum.k_values, spectrum.energy, reliable)))


def write_field_csv(path, fieldarr, grid: UniformGrid, name: str):
    """Long-format (x, y, value) table of one node field."""
    xs = grid.x_coords
    ys = grid.y_coords
    rows = ((xs[i], ys[j], fieldarr[j, i])
            for j in range(grid.ny) for i in range(grid.nx))
    write_csv(path, ["x", "y", name], rows)
