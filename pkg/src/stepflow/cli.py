"""Command-line interface.

Simulation commands (`run`, `tables`, `sweep`) execute configurations and
fill per-run directories; post-processing commands (`average`,
`streamfunc`, `reattach`, `spectrum`, `trace`) are pure functions over
recorded files; `report` renders figures next to the delimited output.
Errors exit non-zero after printing one machine-parsable line to stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import storage
from .config import RunConfig, parse_config
from .diagnostics import (accumulate_average, reattachment_length,
                          stream_function, trace_particles)
from .errors import StepflowError
from .geometry import StepGeometry, build_grid
from .harness import (SUMMARY_HEADER, RegimeThresholds, execute, run_many,
                      summary_row, table_configs, tau_sweep)
from .solver import FlowState
from .spectra import energy_spectrum

log = logging.getLogger(__name__)


def _load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def _grid_from_meta(meta):
    geom = StepGeometry(step_height_ratio=meta["h_over_H"],
                        channel_length=meta["L"], step_x=meta["step_x"])
    return build_grid(geom, meta["hx"]), geom


def _snapshots_in(run_dir) -> list[Path]:
    fields = sorted(Path(run_dir).glob("fields/field_*.snap"))
    if not fields:
        raise StepflowError(f"no field snapshots under {run_dir}")
    return fields


def _load_states(paths):
    grid = None
    states = []
    for path in paths:
        meta, ux, uy, p = storage.read_snapshot(path)
        if grid is None:
            grid, _ = _grid_from_meta(meta)
        states.append(FlowState(ux, uy, p, meta["t"]))
    return grid, states


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    summary = execute(cfg, scale=args.scale, out_dir=args.out,
                      t0_factor=args.t0_factor, coarsen=args.coarsen,
                      keep_fields=not args.no_fields, progress=True)
    print(f"{summary.label}: regime={summary.regime} "
          f"L_s/h={summary.l_s_text()} out={summary.out_dir}")
    return 0


def cmd_tables(args) -> int:
    configs = table_configs()
    if args.only:
        wanted = set(args.only.split(","))
        unknown = wanted - {c.label for c in configs}
        if unknown:
            raise StepflowError(f"unknown table runs: {', '.join(sorted(unknown))}")
        configs = [c for c in configs if c.label in wanted]
    summaries = run_many(configs, workers=args.workers, scale=args.scale,
                         out_dir=args.out, t0_factor=args.t0_factor,
                         coarsen=args.coarsen, keep_fields=not args.no_fields)
    out_root = Path(args.out) if args.out else Path("runs")
    storage.write_csv(out_root / "tables_summary.csv", SUMMARY_HEADER,
                      [summary_row(s) for s in summaries])
    for s in summaries:
        print(f"{s.label}: tau={s.tau} grid={s.grid} T0={s.t_end} "
              f"regime={s.regime} L_s/h={s.l_s_text()}")
    print(f"summary table: {out_root / 'tables_summary.csv'}")
    return 0


def cmd_sweep(args) -> int:
    base = _load_config(args.config)
    taus = [float(v) for v in args.taus.split(",")]
    summaries = tau_sweep(base, taus, scale=args.scale, workers=args.workers,
                          out_dir=args.out, t0_factor=args.t0_factor,
                          coarsen=args.coarsen,
                          keep_fields=not args.no_fields)
    out_root = Path(args.out) if args.out else Path("runs")
    storage.write_csv(out_root / "sweep_summary.csv", SUMMARY_HEADER,
                      [summary_row(s) for s in summaries])
    for s in summaries:
        print(f"tau={s.tau:g}: regime={s.regime} L_s/h={s.l_s_text()}"
              + (f" error={s.error}" if s.error else ""))
    return 0


def cmd_average(args) -> int:
    paths = _snapshots_in(args.run)
    grid, states = _load_states(paths)
    lo, hi = args.t_from - 1e-9, args.t_to + 1e-9
    window = [s for s in states if lo <= s.t <= hi]
    if args.every is not None:
        window = [s for s in window
                  if abs(s.t / args.every - round(s.t / args.every)) < 1e-6]
    if len(window) < 2:
        raise StepflowError(
            f"need at least two snapshots in [{args.t_from}, {args.t_to}], "
            f"found {len(window)}")
    avg = accumulate_average(window)
    out = Path(args.out) if args.out else (
        Path(args.run) / f"avg_{args.t_from:g}_{args.t_to:g}.snap")
    meta, *_ = storage.read_snapshot(paths[0])
    storage.write_average_snapshot(out, avg, grid, meta.get("config_hash", ""))
    print(f"averaged {avg.n_frames} frames over [{avg.t1:g}, {avg.t2:g}] -> {out}")
    return 0


def cmd_streamfunc(args) -> int:
    meta, avg = storage.read_average_snapshot(args.avg)
    grid, _ = _grid_from_meta(meta)
    psi = stream_function(avg.ux_av, grid)
    out = Path(args.out) if args.out else Path(args.avg).with_suffix(".psi.csv")
    storage.write_field_csv(out, psi, grid, "psi")
    print(f"stream function -> {out}")
    return 0


def cmd_reattach(args) -> int:
    meta, avg = storage.read_average_snapshot(args.avg)
    grid, geom = _grid_from_meta(meta)
    l_s = reattachment_length(avg, geom, grid)
    text = "unbounded" if math.isinf(l_s) else f"{l_s:.4f}"
    print(f"L_s/h = {text}")
    return 0


def cmd_spectrum(args) -> int:
    series = storage.read_probe_csv(args.probe)
    sel = series.t >= args.t_start - 1e-9
    values = getattr(series, args.component)[sel]
    if values.size % 2 == 1:
        values = values[:-1]
        log.info("dropped one sample to make the series length even")
    spec = energy_spectrum(values)
    out = Path(args.out) if args.out else (
        Path(args.probe).with_suffix(f".{args.component}.spectrum.csv"))
    storage.write_spectrum_csv(out, spec)
    print(f"N={spec.n_samples} reliable k<={spec.reliable_max_k} -> {out}")
    return 0


def cmd_trace(args) -> int:
    seeds = []
    for part in args.seeds.split(";"):
        x, y = part.split(",")
        seeds.append((float(x), float(y)))
    grid, states = _load_states(_snapshots_in(args.run))
    trajectories = trace_particles(states, seeds, grid, dt=args.dt)
    out = Path(args.out) if args.out else Path(args.run) / "trajectories.csv"
    rows = []
    for pid, traj in enumerate(trajectories):
        rows.extend((pid, t, x, y) for t, x, y in traj)
    storage.write_csv(out, ["particle", "t", "x", "y"], rows)
    print(f"{len(seeds)} trajectories -> {out}")
    return 0


def cmd_report(args) -> int:
    from . import report
    figures = report.render_run_report(args.run, out_dir=args.out)
    for fig in figures:
        print(f"figure: {fig}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepflow",
        description="Backward-facing-step flow simulator and diagnostics",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress and warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scale_options(p):
        p.add_argument("--scale", choices=("full", "desk"), default="full")
        p.add_argument("--t0-factor", type=float, default=0.25,
                       dest="t0_factor",
                       help="desk-scale run-time factor (default 0.25)")
        p.add_argument("--coarsen", type=int, default=2,
                       help="desk-scale grid coarsening (default 2)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--no-fields", action="store_true",
                       help="skip field snapshot files")

    p = sub.add_parser("run", help="execute one configuration file")
    p.add_argument("--config", required=True)
    add_scale_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tables", help="execute the published table runs")
    p.add_argument("--only", default=None,
                   help="comma-separated run labels (e.g. t1r4,t3r2)")
    p.add_argument("--workers", type=int, default=1)
    add_scale_options(p)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("sweep", help="run a relaxation-parameter sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--taus", required=True,
                   help="comma-separated tau values")
    p.add_argument("--workers", type=int, default=1)
    add_scale_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("average", help="time-average recorded snapshots")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--from", dest="t_from", type=float, required=True)
    p.add_argument("--to", dest="t_to", type=float, required=True)
    p.add_argument("--every", type=float, default=None,
                   help="keep only snapshots at multiples of this interval")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("streamfunc", help="stream function of an averaged field")
    p.add_argument("--avg", required=True, help="averaged snapshot file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_streamfunc)

    p = sub.add_parser("reattach", help="separation length of an averaged field")
    p.add_argument("--avg", required=True, help="averaged snapshot file")
    p.set_defaults(func=cmd_reattach)

    p = sub.add_parser("spectrum", help="pulsation energy spectrum of a probe")
    p.add_argument("--probe", required=True, help="probe CSV file")
    p.add_argument("--t-start", dest="t_start", type=float, default=0.0,
                   help="drop samples before this time")
    p.add_argument("--component", choices=("ux", "uy"), default="ux")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trace", help="passive particle trajectories")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--seeds", required=True,
                   help="semicolon-separated x,y pairs: '0.5,0.75;1,0.6'")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("report", help="render figures for a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StepflowError as exc:
        print(f"error kind={type(exc).__name__} message={str(exc)!r}",
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error kind=OSError message={str(exc)!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
