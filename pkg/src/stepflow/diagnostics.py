"""Post-processing of flow snapshots: probes, time averages, stream
function, reattachment length and passive particle trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CellKind, StepGeometry, UniformGrid
from .solver import FlowState


@dataclass
class ProbeSeries:
    """Velocity record at one monitor point, sampled every `sample_interval`."""

    location: tuple[float, float]
    t: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    sample_interval: float

    def __post_init__(self):
        if self.t.size >= 2:
            gaps = np.diff(self.t)
            if np.abs(gaps - self.sample_interval).max() > 1e-12:
                raise ValueError("probe samples are not uniformly spaced")


@dataclass
class AveragedField:
    """Velocity field averaged over [t1, t2] plus the derived stream function."""

    t1: float
    t2: float
    n_frames: int
    ux_av: np.ndarray
    uy_av: np.ndarray
    p_av: np.ndarray
    psi: np.ndarray | None = field(default=None)


# default monitor points behind the step, far from the walls; the physical
# campaign recorded four such locations without publishing coordinates
DEFAULT_PROBES = ((1.0, 0.75), (2.0, 0.75), (3.0, 0.75), (4.0, 0.75))


def bilinear_sample(fieldarr: np.ndarray, grid: UniformGrid, x: float,
                    y: float) -> float:
    """Bilinear interpolation of a node field at (x, y)."""
    fx = x / grid.hx
    fy = y / grid.hy
    i0 = min(max(int(math.floor(fx)), 0), grid.nx - 2)
    j0 = min(max(int(math.floor(fy)), 0), grid.ny - 2)
    sx = min(max(fx - i0, 0.0), 1.0)
    sy = min(max(fy - j0, 0.0), 1.0)
    f = fieldarr
    return ((1 - sx) * (1 - sy) * f[j0, i0]
            + sx * (1 - sy) * f[j0, i0 + 1]
            + (1 - sx) * sy * f[j0 + 1, i0]
            + sx * sy * f[j0 + 1, i0 + 1])


def sample_velocity(state: FlowState, grid: UniformGrid, points) -> np.ndarray:
    """(n, 2) array of interpolated velocity at the given points."""
    out = np.empty((len(points), 2))
    for n, (x, y) in enumerate(points):
        out[n, 0] = bilinear_sample(state.ux, grid, x, y)
        out[n, 1] = bilinear_sample(state.uy, grid, x, y)
    return out


def accumulate_average(snapshots) -> AveragedField:
    """Trapezoidal time average of uniformly spaced snapshots."""
    snaps = list(snapshots)
    if len(snaps) < 2:
        raise ValueError("averaging needs at least two snapshots")
    times = np.array([s.t for s in snaps])
    gaps = np.diff(times)
    step = gaps[0]
    if step <= 0 or np.abs(gaps - step).max() > 1e-9 * max(step, 1.0):
        raise ValueError("snapshots are not uniformly spaced in time")
    weights = np.full(len(snaps), step)
    weights[0] = weights[-1] = 0.5 * step
    weights /= times[-1] - times[0]
    ux = np.zeros_like(snaps[0].ux)
    uy = np.zeros_like(ux)
    p = np.zeros_like(ux)
    for w, s in zip(weights, snaps):
        ux += w * s.ux
        uy += w * s.uy
        p += w * s.p
    return AveragedField(t1=float(times[0]), t2=float(times[-1]),
                         n_frames=len(snaps), ux_av=ux, uy_av=uy, p_av=p)


class OnlineAverager:
    """Streaming equivalent of `accumulate_average` (same trapezoid weights).

    Frames must arrive in order with a fixed spacing; endpoint frames get
    half weight, so feeding the same frames gives bit-comparable results.
    """

    def __init__(self):
        self._prev = None
        self._sum_ux = None
        self._sum_uy = None
        self._sum_p = None
        self.t1 = None
        self.t2 = None
        self.n_frames = 0

    def add(self, state: FlowState):
        if self._prev is None:
            self._sum_ux = np.zeros_like(state.ux)
            self._sum_uy = np.zeros_like(state.uy)
            self._sum_p = np.zeros_like(state.p)
            self.t1 = state.t
        else:
            half = 0.5 * (state.t - self._prev.t)
            for total, prev, cur in (
                (self._sum_ux, self._prev.ux, state.ux),
                (self._sum_uy, self._prev.uy, state.uy),
                (self._sum_p, self._prev.p, state.p),
            ):
                total += half * (prev + cur)
        self._prev = FlowState(state.ux, state.uy, state.p, state.t)
        self.t2 = state.t
        self.n_frames += 1

    def result(self) -> AveragedField:
        if self.n_frames < 2:
            raise ValueError("averaging needs at least two snapshots")
        span = self.t2 - self.t1
        return AveragedField(
            t1=self.t1, t2=self.t2, n_frames=self.n_frames,
            ux_av=self._sum_ux / span, uy_av=self._sum_uy / span,
            p_av=self._sum_p / span,
        )


def stream_function(ux_av: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """psi(x, y) = integral of the streamwise velocity from the bottom wall.

    Column-wise trapezoidal quadrature with psi = 0 on the bottom wall;
    averaging and integration commute, so this works on instantaneous and
    averaged fields alike.
    """
    psi = np.zeros_like(ux_av)
    increments = 0.5 * grid.hy * (ux_av[1:, :] + ux_av[:-1, :])
    psi[1:, :] = np.cumsum(increments, axis=0)
    return psi


def near_wall_profile(ux_av: np.ndarray, wall: str = "bottom") -> np.ndarray:
    """Streamwise velocity one node above the reattachment wall."""
    if wall == "bottom":
        return ux_av[1, :]
    if wall == "top":
        return ux_av[-2, :]
    raise ValueError(f"unknown wall {wall!r}")


def reattachment_length(avg: AveragedField, geom: StepGeometry,
                        grid: UniformGrid, wall: str = "bottom") -> float:
    """Separation-zone length behind the step in step heights L_s/h.

    Scans the near-wall averaged velocity downstream of the step face for
    the last negative-to-positive sign change, locating it by linear
    interpolation.  Candidate changes must terminate a contiguous
    backflow run of at least 3 nodes; returns 0 when the near-wall flow
    never reverses and inf when the backflow still touches the outlet
    (the separation zone left the domain).
    """
    h = geom.step_height_ratio
    if h <= 0:
        raise ValueError("reattachment length needs a step (h > 0)")
    u = near_wall_profile(avg.ux_av, wall)
    x = grid.x_coords
    start = grid.i_step + 1
    neg = u[start:] < 0.0
    if not neg.any():
        return 0.0
    if neg[-1]:
        return math.inf
    min_run = 3
    best = None
    run = 0
    for idx in range(neg.size):
        if neg[idx]:
            run += 1
        else:
            if run >= min_run:
                i = start + idx  # first non-negative node after the run
                u0 = u[i - 1]
                u1 = u[i]
                frac = u0 / (u0 - u1) if u1 != u0 else 0.0
                best = x[i - 1] + frac * grid.hx
            run = 0
    if best is None:
        return 0.0
    return (best - geom.step_x) / h


def trace_particles(snapshots, seeds, grid: UniformGrid,
                    dt: float = 1e-3) -> list[np.ndarray]:
    """Passive tracer trajectories through a time-ordered snapshot sequence.

    Midpoint integration of dX/dt = u(X, t) with bilinear interpolation in
    space and linear interpolation between snapshots in time.  A particle
    freezes once it reaches a wall/solid region or leaves through the
    outlet.  Returns one (n, 3) array of (t, x, y) rows per seed.
    """
    snaps = list(snapshots)
    if len(snaps) < 1:
        raise ValueError("need at least one snapshot")
    if len(snaps) == 1:
        snaps = [snaps[0], FlowState(snaps[0].ux, snaps[0].uy, snaps[0].p,
                                     snaps[0].t + max(dt, 1.0))]
    times = np.array([s.t for s in snaps])
    if times.size > 2 and np.diff(times).max() > 0.5 + 1e-9:
        raise ValueError("snapshot spacing exceeds 0.5 time units")

    x_max = grid.x_coords[-1]
    y_max = grid.y_coords[-1]

    for sx, sy in seeds:
        if not (0.0 <= sx <= x_max and 0.0 <= sy <= y_max):
            raise ValueError(f"seed ({sx}, {sy}) lies outside the domain")
        i = min(int(sx / grid.hx), grid.nx - 1)
        j = min(int(sy / grid.hy), grid.ny - 1)
        if grid.cell_kinds[j, i] == CellKind.SOLID:
            raise ValueError(f"seed ({sx}, {sy}) lies inside the solid step")

    def velocity(x, y, t):
        k = np.searchsorted(times, t, side="right") - 1
        k = min(max(k, 0), len(snaps) - 2)
        s0, s1 = snaps[k], snaps[k + 1]
        frac = (t - s0.t) / (s1.t - s0.t)
        frac = min(max(frac, 0.0), 1.0)
        u0 = bilinear_sample(s0.ux, grid, x, y)
        v0 = bilinear_sample(s0.uy, grid, x, y)
        u1 = bilinear_sample(s1.ux, grid, x, y)
        v1 = bilinear_sample(s1.uy, grid, x, y)
        return (1 - frac) * u0 + frac * u1, (1 - frac) * v0 + frac * v1

    def stopped(x, y):
        if x <= 0.0 or x >= x_max or y <= 0.0 or y >= y_max:
            return True
        i = min(int(x / grid.hx), grid.nx - 1)
        j = min(int(y / grid.hy), grid.ny - 1)
        return grid.cell_kinds[j, i] == CellKind.SOLID

    t0, t1 = float(times[0]), float(times[-1])
    n_steps = max(1, int(round((t1 - t0) / dt)))
    trajectories = []
    for sx, sy in seeds:
        xs = [(t0, sx, sy)]
        x, y = float(sx), float(sy)
        alive = True
        t = t0
        for _ in range(n_steps):
            if alive:
                u, v = velocity(x, y, t)
                xm, ym = x + 0.5 * dt * u, y + 0.5 * dt * v
                um, vm = velocity(xm, ym, t + 0.5 * dt)
                x, y = x + dt * um, y + dt * vm
                if stopped(x, y):
                    alive = False
                    x = min(max(x, 0.0), x_max)
                    y = min(max(y, 0.0), y_max)
            t += dt
            xs.append((t, x, y))
        trajectories.append(np.array(xs))
    return trajectories


def mass_balance(ux: np.ndarray, grid: UniformGrid) -> dict:
    """Inlet/outlet flux balance of a (possibly averaged) streamwise field."""
    q_in = float(np.trapezoid(ux[:, 0], dx=grid.hy))
    q_out = float(np.trapezoid(ux[:, -1], dx=grid.hy))
    rel = abs(q_in - q_out) / abs(q_in) if q_in != 0.0 else math.inf
    return {"inlet_flux": q_in, "outlet_flux": q_out, "relative_imbalance": rel}
