"""Declarative execution of the reference numerical experiments.

`table_configs` holds the eleven published runs (three Reynolds numbers,
a relaxation-parameter sweep, two grids); `execute` runs one configuration
at full or desk scale, records probes/fields/averages/spectra into a run
directory and classifies the regime; `tau_sweep` maps a list of relaxation
parameters over a base configuration.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .diagnostics import (OnlineAverager, ProbeSeries, mass_balance,
                          reattachment_length, sample_velocity)
from .errors import BlowUpError, StepflowError
from .solver import FlowState, advance, initial_state
from .spectra import energy_spectrum
from . import storage

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "STEPFLOW_OUT"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


@dataclass(frozen=True)
class RegimeThresholds:
    """Cutoffs for the qualitative regime classification (logged per run)."""

    quasi_low: float = 0.5    # sustained-oscillation amplitude ratio band
    quasi_high: float = 2.0
    decay_ratio: float = 0.1  # below this the oscillations count as decaying


@dataclass
class RunSummary:
    label: str
    regime: str  # quasi-periodic | decaying | unbounded-growth | blow-up
    l_s_over_h: float  # inf = unbounded, nan = not measurable
    wall_clock_s: float
    config_hash: str
    scale: str = "full"
    t0_factor: float = 1.0
    coarsen: int = 1
    t_end: float = 0.0
    hx: float = 0.0
    tau: float = 0.0
    re: float = 0.0
    grid: str = ""
    avg_window: tuple = (0.0, 0.0)
    amp_ratio: float = float("nan")
    mass_imbalance: float = float("nan")
    blowup_t: float | None = None
    error: str | None = None
    out_dir: str = ""

    def __post_init__(self):
        if self.regime == "unbounded-growth":
            self.l_s_over_h = math.inf

    def l_s_text(self) -> str:
        if math.isinf(self.l_s_over_h):
            return "unbounded"
        if math.isnan(self.l_s_over_h):
            return "n/a"
        return f"{self.l_s_over_h:.3f}"


SUMMARY_HEADER = ["label", "re", "tau", "hx", "grid", "T0", "scale",
                  "t0_factor", "coarsen", "L_s_over_h", "regime", "amp_ratio",
                  "mass_imbalance", "avg_t1", "avg_t2", "wall_clock_s",
                  "config_hash", "error"]


def summary_row(s: RunSummary) -> list:
    return [s.label, s.re, s.tau, s.hx, s.grid, s.t_end, s.scale,
            s.t0_factor, s.coarsen, s.l_s_text(), s.regime,
            s.amp_ratio, s.mass_imbalance, s.avg_window[0], s.avg_window[1],
            round(s.wall_clock_s, 2), s.config_hash,
            s.error or ""]


def table_configs() -> list[RunConfig]:
    """The eleven published run configurations.

    Sound-speed ratios follow the per-case inlet velocities (1.40, 1.45
    and 1.25 m/s against 340 m/s); the tau = 0.0001 run integrates with
    the reduced step dt = 1e-5.
    """
    t1 = dict(re=4667.0, step_height_ratio=0.5, cs_over_u0=340.0 / 1.40)
    t2 = dict(re=4012.0, step_height_ratio=0.44, cs_over_u0=340.0 / 1.45)
    t3 = dict(re=1667.0, step_height_ratio=0.33, cs_over_u0=340.0 / 1.25)
    rows = [
        RunConfig(label="t1r1", tau=0.0001, hx=0.0125, channel_length=5.0,
                  t_end=20.0, dt=1e-5, **t1),
        RunConfig(label="t1r2", tau=0.001, hx=0.00833, channel_length=5.0,
                  t_end=40.0, **t1),
        RunConfig(label="t1r3", tau=0.001, hx=0.0125, channel_length=5.0,
                  t_end=20.0, **t1),
        RunConfig(label="t1r4", tau=0.05, hx=0.00833, channel_length=5.0,
                  t_end=120.0, **t1),
        RunConfig(label="t1r5", tau=0.05, hx=0.0125, channel_length=5.0,
                  t_end=120.0, **t1),
        RunConfig(label="t1r6", tau=0.1, hx=0.0125, channel_length=7.5,
                  t_end=40.0, **t1),
        RunConfig(label="t2r1", tau=0.001, hx=0.0125, channel_length=5.0,
                  t_end=20.0, **t2),
        RunConfig(label="t2r2", tau=0.05, hx=0.00833, channel_length=5.0,
                  t_end=200.0, **t2),
        RunConfig(label="t3r1", tau=0.001, hx=0.0125, channel_length=5.0,
                  t_end=20.0, **t3),
        RunConfig(label="t3r2", tau=0.02, hx=0.0125, channel_length=6.0,
                  t_end=160.0, **t3),
        RunConfig(label="t3r3", tau=0.05, hx=0.0125, channel_length=6.0,
                  t_end=60.0, **t3),
    ]
    return rows


def oscillation_amplitude_ratio(series_list) -> float:
    """Median over probes of std(last third) / std(middle third) of uy."""
    ratios = []
    for series in series_list:
        u = series.uy
        n = u.size
        if n < 9:
            continue
        mid = u[n // 3: 2 * n // 3]
        last = u[2 * n // 3:]
        a_mid = float(np.std(mid))
        a_last = float(np.std(last))
        if a_mid < 1e-12:
            ratios.append(0.0 if a_last < 1e-12 else math.inf)
        else:
            ratios.append(a_last / a_mid)
    if not ratios:
        return float("nan")
    return float(np.median(ratios))


def classify_regime(amp_ratio: float, l_s: float,
                    thresholds: RegimeThresholds) -> str:
    if math.isinf(l_s):
        return "unbounded-growth"
    if not math.isnan(amp_ratio) and amp_ratio < thresholds.decay_ratio:
        return "decaying"
    return "quasi-periodic"


def execute(config: RunConfig, scale: str = "full", out_dir=None,
            t0_factor: float = 0.25, coarsen: int = 2,
            thresholds: RegimeThresholds | None = None,
            keep_fields: bool = True, progress: bool = False) -> RunSummary:
    """Run one configuration and write its artifact directory.

    Desk scale shortens the run by `t0_factor` and coarsens the grid by
    `coarsen`; both factors are recorded in the summary so reduced runs
    are never mistaken for full reproductions.
    """
    thresholds = thresholds or RegimeThresholds()
    if scale == "full":
        run_cfg, t0_factor, coarsen = config, 1.0, 1
    elif scale == "desk":
        run_cfg = config.rescaled(t0_factor=t0_factor, coarsen=coarsen)
    else:
        raise ValueError(f"unknown scale {scale!r}")

    out = Path(out_dir) if out_dir is not None else (
        output_root() / (config.label if scale == "full"
                         else f"{config.label}_desk"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(run_cfg.to_text())

    grid = run_cfg.make_grid()
    params = run_cfg.make_params(grid)
    params.validate()
    chash = run_cfg.config_hash()
    geom = grid.geometry

    dt = run_cfg.dt
    n_steps = int(round(run_cfg.t_end / dt))
    probe_every = int(round(run_cfg.probe_interval / dt))
    field_every = int(round(run_cfg.field_interval / dt))
    t1_avg, t2_avg = run_cfg.averaging_window()

    state = initial_state(params, seed=run_cfg.seed,
                          perturbation=run_cfg.perturbation)
    averager = OnlineAverager()
    probe_rows = []
    blowup_t = None
    error_msg = None
    started = time.perf_counter()
    log.info("run %s: %s scale, grid %dx%d, %d steps",
             run_cfg.label, scale, grid.ny, grid.nx, n_steps)

    fields_dir = out / "fields"
    if state.t >= t1_avg - 1e-9:
        averager.add(state)
    try:
        for n in range(1, n_steps + 1):
            state = advance(state, params)
            state.t = n * dt  # exact multiples, no accumulation drift
            if n % probe_every == 0:
                probe_rows.append(
                    (state.t, sample_velocity(state, grid, run_cfg.probes)))
            if n % field_every == 0:
                if keep_fields:
                    storage.write_state_snapshot(
                        fields_dir / f"field_{state.t:012.4f}.snap",
                        state, grid, chash)
                if t1_avg - 1e-9 <= state.t <= t2_avg + 1e-9:
                    averager.add(state)
            if progress and n % (field_every * 10) == 0:
                log.info("run %s: t = %.1f / %.1f", run_cfg.label, state.t,
                         run_cfg.t_end)
    except BlowUpError as exc:
        blowup_t = exc.t
        error_msg = str(exc)
        log.warning("run %s: %s", run_cfg.label, exc)

    # probe records
    probes_list = []
    if probe_rows:
        times = np.array([row[0] for row in probe_rows])
        samples = np.array([row[1] for row in probe_rows])  # (n, np, 2)
        for pi, loc in enumerate(run_cfg.probes):
            series = ProbeSeries(location=loc, t=times,
                                 ux=samples[:, pi, 0], uy=samples[:, pi, 1],
                                 sample_interval=run_cfg.probe_interval)
            probes_list.append(series)
            storage.write_probe_csv(out / "probes" / f"p{pi + 1}.csv", series)
        storage.write_csv(out / "probes" / "probes.csv",
                          ["name", "x", "y"],
                          [(f"p{pi + 1}", loc[0], loc[1])
                           for pi, loc in enumerate(run_cfg.probes)])

    # averaged field, reattachment, mass balance
    l_s = float("nan")
    imbalance = float("nan")
    if blowup_t is None and averager.n_frames >= 2:
        avg = averager.result()
        storage.write_average_snapshot(out / "average.snap", avg, grid, chash)
        l_s = reattachment_length(avg, geom, grid)
        imbalance = mass_balance(avg.ux_av, grid)["relative_imbalance"]

    # probe spectra over the tail of the run (after the averaging start)
    for pi, series in enumerate(probes_list):
        sel = series.t >= t1_avg - 1e-9
        for comp in ("ux", "uy"):
            vals = getattr(series, comp)[sel]
            if vals.size % 2 == 1:
                vals = vals[:-1]
            if vals.size >= 8:
                spec = energy_spectrum(vals)
                storage.write_spectrum_csv(
                    out / "spectra" / f"p{pi + 1}_{comp}.csv", spec)

    amp_ratio = oscillation_amplitude_ratio(probes_list)
    if blowup_t is not None:
        regime = "blow-up"
    else:
        regime = classify_regime(amp_ratio, l_s, thresholds)
    log.info("run %s: regime=%s thresholds=%s", run_cfg.label, regime,
             thresholds)

    summary = RunSummary(
        label=run_cfg.label, regime=regime, l_s_over_h=l_s,
        wall_clock_s=time.perf_counter() - started, config_hash=chash,
        scale=scale, t0_factor=t0_factor, coarsen=coarsen,
        t_end=run_cfg.t_end, hx=run_cfg.hx, tau=run_cfg.tau, re=run_cfg.re,
        grid=f"{grid.ny}x{grid.nx}", avg_window=(t1_avg, t2_avg),
        amp_ratio=amp_ratio, mass_imbalance=imbalance, blowup_t=blowup_t,
        error=error_msg, out_dir=str(out),
    )
    storage.write_csv(out / "summary.csv", SUMMARY_HEADER,
                      [summary_row(summary)])
    return summary


def _execute_job(args):
    config, kwargs = args
    try:
        return execute(config, **kwargs)
    except StepflowError as exc:
        return RunSummary(label=config.label, regime="blow-up",
                          l_s_over_h=float("nan"), wall_clock_s=0.0,
                          config_hash=config.config_hash(),
                          tau=config.tau, re=config.re, hx=config.hx,
                          t_end=config.t_end, error=str(exc))


def run_many(configs, workers: int = 1, **kwargs) -> list[RunSummary]:
    """Execute independent configs, optionally across processes."""
    jobs = [(cfg, dict(kwargs)) for cfg in configs]
    for job in jobs:
        if "out_dir" in job[1] and job[1]["out_dir"] is not None:
            job[1]["out_dir"] = str(Path(job[1]["out_dir"]) / job[0].label)
    if workers <= 1:
        return [_execute_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_job, jobs))


def tau_sweep(base: RunConfig, taus, scale: str = "full", workers: int = 1,
              **kwargs) -> list[RunSummary]:
    """One run per relaxation parameter; failures land in their row."""
    if not taus:
        raise ValueError("tau sweep needs at least one value")
    configs = [replace(base, tau=tau, label=f"{base.label}_tau{tau:g}")
               for tau in taus]
    return run_many(configs, workers=workers, scale=scale, **kwargs)
