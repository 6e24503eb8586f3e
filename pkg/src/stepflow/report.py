"""Figure rendering for run directories.

Everything here consumes the delimited/binary artifacts a run already
wrote (probe CSVs, spectrum CSVs, averaged snapshot) and drops PNG files
next to them; the simulation and post-processing paths never depend on
this module.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import storage
from .diagnostics import reattachment_length, stream_function
from .errors import StepflowError
from .geometry import StepGeometry, build_grid

DPI = 150


def _figure_dir(run_dir, out_dir):
    out = Path(out_dir) if out_dir else Path(run_dir) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    return out


def probe_traces_figure(run_dir, out_dir=None) -> Path | None:
    run_dir = Path(run_dir)
    probe_files = sorted(run_dir.glob("probes/p*.csv"))
    probe_files = [p for p in probe_files if p.stem != "probes"]
    if not probe_files:
        return None
    fig, axes = plt.subplots(len(probe_files), 1, sharex=True,
                             figsize=(8, 1.8 * len(probe_files)),
                             squeeze=False)
    for ax, path in zip(axes[:, 0], probe_files):
        series = storage.read_probe_csv(path)
        ax.plot(series.t, series.ux, lw=0.7, label="u_x")
        ax.plot(series.t, series.uy, lw=0.7, label="u_y")
        ax.set_ylabel(path.stem)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel("t")
    fig.suptitle("probe velocity traces")
    out = _figure_dir(run_dir, out_dir) / "probes.png"
    fig.savefig(out, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return out


def spectra_figure(run_dir, out_dir=None) -> Path | None:
    run_dir = Path(run_dir)
    spec_files = sorted(run_dir.glob("spectra/p*_ux.csv"))
    if not spec_files:
        return None
    fig, ax = plt.subplots(figsize=(6, 5))
    k_ref = None
    for path in spec_files:
        _, rows = storage.read_csv(path)
        k = np.array([int(r[0]) for r in rows])
        e = np.array([float(r[1]) for r in rows])
        reliable = np.array([r[2] == "1" for r in rows])
        ax.loglog(k[reliable & (e > 0)], e[reliable & (e > 0)], lw=0.8,
                  label=path.stem)
        if k_ref is None and reliable.any():
            k_ref = k[reliable]
            e_ref = e[reliable]
    if k_ref is not None and len(k_ref) > 3:
        anchor = max(e_ref[min(4, len(e_ref) - 1)], 1e-300)
        kk = k_ref.astype(float)
        ax.loglog(kk, anchor * (kk / kk[min(4, len(kk) - 1)]) ** (-5.0 / 3.0),
                  "k--", lw=1.0, label="k^(-5/3)")
    ax.set_xlabel("k")
    ax.set_ylabel("E(k)")
    ax.set_title("pulsation energy spectra (reliable range)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    out = _figure_dir(run_dir, out_dir) / "spectra.png"
    fig.savefig(out, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return out


def averaged_flow_figure(run_dir, out_dir=None) -> Path | None:
    run_dir = Path(run_dir)
    avg_path = run_dir / "average.snap"
    if not avg_path.exists():
        return None
    meta, avg = storage.read_average_snapshot(avg_path)
    geom = StepGeometry(step_height_ratio=meta["h_over_H"],
                        channel_length=meta["L"], step_x=meta["step_x"])
    grid = build_grid(geom, meta["hx"])
    psi = stream_function(avg.ux_av, grid)
    x = grid.x_coords
    y = grid.y_coords
    fig, ax = plt.subplots(figsize=(10, 10 * (y[-1] / x[-1]) + 1.2))
    speed = np.hypot(avg.ux_av, avg.uy_av)
    pc = ax.pcolormesh(x, y, speed, shading="auto", cmap="viridis")
    fig.colorbar(pc, ax=ax, label="|u| (averaged)")
    levels = np.linspace(psi.min(), psi.max(), 25)
    ax.contour(x, y, psi, levels=levels, colors="w", linewidths=0.5)
    ax.contour(x, y, psi, levels=[0.0], colors="r", linewidths=1.2)
    l_s = reattachment_length(avg, geom, grid)
    if math.isfinite(l_s) and l_s > 0:
        x_r = geom.step_x + l_s * geom.step_height_ratio
        ax.plot([x_r], [0.0], "rv", ms=8, clip_on=False)
        ax.annotate(f"L_s/h = {l_s:.2f}", (x_r, 0.02), color="r", fontsize=9)
    ax.set_xlabel("x / H")
    ax.set_ylabel("y / H")
    ax.set_title(f"averaged flow, t in [{avg.t1:g}, {avg.t2:g}]")
    out = _figure_dir(run_dir, out_dir) / "averaged_flow.png"
    fig.savefig(out, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return out


def render_run_report(run_dir, out_dir=None) -> list[Path]:
    """All applicable figures for one run directory."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise StepflowError(f"{run_dir} is not a run directory")
    figures = []
    for renderer in (probe_traces_figure, spectra_figure,
                     averaged_flow_figure):
        path = renderer(run_dir, out_dir)
        if path is not None:
            figures.append(path)
    if not figures:
        raise StepflowError(f"{run_dir} holds nothing to plot")
    return figures
