"""Time integration of the regularized incompressible flow equations.

The momentum balance carries, next to the usual advection/pressure/viscous
terms, the dissipative tensor div(u w + w u) built from the auxiliary
velocity w = tau * ((u . grad) u + grad p); mass conservation is imposed as
div(u - w) = 0, which turns into the elliptic pressure equation

    tau * lap p = div(u* - tau (u . grad) u)

solved after the explicit momentum predictor.  The new pressure corrects
the velocity through u <- u* - dt * grad(p_new - p_old).  All regularizing
terms vanish as tau -> 0; tau = 0 is accepted as a verification mode that
falls back to a classical pressure-increment projection.

Boundary conditions: prescribed profile at the inlet opening (flat by
default), no-slip on walls and the step face, zero-gradient velocity and
zero reference pressure at the outlet.  The pressure sees homogeneous
Neumann walls and a momentum-consistent Neumann datum along the inlet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BlowUpError, GridError, PressureConvergenceError
from .geometry import CellKind, UniformGrid

log = logging.getLogger(__name__)

# c_s / U0 for the wind-tunnel regimes the solver targets (air at ~1.4 m/s);
# only feeds the soft lower bound on tau.
DEFAULT_CS_OVER_U0 = 243.0


@dataclass
class FlowState:
    """Velocity components and kinematic pressure on the grid nodes."""

    ux: np.ndarray
    uy: np.ndarray
    p: np.ndarray
    t: float

    def copy(self) -> "FlowState":
        return FlowState(self.ux.copy(), self.uy.copy(), self.p.copy(), self.t)


@dataclass
class RegularizingVelocity:
    wx: np.ndarray
    wy: np.ndarray


class _DirectPressurePlan:
    """Precomputed cosine-mode/tridiagonal factorization for rectangle grids.

    The wall-mirrored y-operator is diagonalized by the cosine vectors
    cos(pi k j / (ny - 1)); at the grid's small ny a dense basis matmul
    beats an FFT-backed transform, so the basis and its inverse are kept
    as matrices.
    """

    def __init__(self, ny, nx, hx, hy):
        self.m = nx - 1  # pressure unknowns per row; last column is Dirichlet
        k = np.arange(ny)
        self.lam = (2.0 * np.cos(np.pi * k / (ny - 1)) - 2.0) / (hy * hy)
        j = np.arange(ny)
        self.basis = np.cos(np.pi * np.outer(j, k) / (ny - 1))
        self.basis_inv = np.linalg.inv(self.basis)
        inv_hx2 = 1.0 / (hx * hx)
        self.ainv = inv_hx2
        b = self.lam[:, None] - 2.0 * inv_hx2 * np.ones((ny, self.m))
        c = np.full((ny, self.m), inv_hx2)
        c[:, 0] = 2.0 * inv_hx2  # mirrored Neumann node doubles its east link
        wcoef = np.empty_like(b)
        cprime = np.empty_like(b)
        wcoef[:, 0] = 1.0 / b[:, 0]
        cprime[:, 0] = c[:, 0] * wcoef[:, 0]
        for i in range(1, self.m):
            wcoef[:, i] = 1.0 / (b[:, i] - inv_hx2 * cprime[:, i - 1])
            cprime[:, i] = c[:, i] * wcoef[:, i]
        self.wcoef = np.ascontiguousarray(wcoef)
        self.cprime = np.ascontiguousarray(cprime)
        self._fhat = np.empty((ny, self.m))
        self._qhat = np.empty((ny, self.m))

    def solve_rhs(self, rhs, outlet_values=None):
        """Solve for the contiguous (ny, nx - 1) right-hand side `rhs`."""
        if outlet_values is not None:
            rhs = rhs.copy()
            rhs[:, -1] -= outlet_values * self.ainv
        np.matmul(self.basis_inv, rhs, out=self._fhat)
        _kernels.thomas_batch(self._fhat, self.wcoef, self.cprime, self.ainv,
                              self._qhat)
        ny = rhs.shape[0]
        p = np.empty((ny, self.m + 1))
        np.matmul(self.basis, self._qhat, out=p[:, : self.m])
        p[:, self.m] = 0.0 if outlet_values is None else outlet_values
        return p

    def solve(self, f, outlet_values=None):
        return self.solve_rhs(np.ascontiguousarray(f[:, : self.m]), outlet_values)


@dataclass
class SolverParams:
    """Physical and numerical parameters of one simulation."""

    grid: UniformGrid
    re: float
    tau: float
    dt: float
    upwind: float = 0.0
    cs_over_u0: float = DEFAULT_CS_OVER_U0
    nu_override: float | None = None
    inlet_profile: np.ndarray | None = None
    pressure_tol: float = 1e-7
    pressure_max_iter: int = 100_000
    pressure_method: str = "auto"  # auto | direct | sor
    sor_omega: float | None = None
    blowup_limit: float = 1e3
    # rescale the zero-gradient outlet profile to carry the inlet flux; the
    # dissipative terms produce O(tau) streamwise flux otherwise (their mass
    # current is u - w, not u)
    outlet_flux_correction: bool = True

    _plan: _DirectPressurePlan | None = field(default=None, repr=False)
    _inlet_column: np.ndarray | None = field(default=None, repr=False)
    _inlet_rhs: np.ndarray | None = field(default=None, repr=False)
    _inlet_rows: np.ndarray | None = field(default=None, repr=False)
    _dt_guard_warned: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.re <= 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")
        if self.tau < 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 <= self.upwind <= 1.0:
            raise ValueError(f"upwind blending must lie in [0, 1], got {self.upwind}")
        grid = self.grid
        rows = grid.inlet_rows()
        col = np.zeros(grid.ny)
        if self.inlet_profile is None:
            col[rows] = 1.0
        else:
            profile = np.asarray(self.inlet_profile, dtype=float)
            if profile.shape != rows.shape:
                raise ValueError(
                    f"inlet_profile needs {rows.size} values, got {profile.size}"
                )
            col[rows] = profile
        self._inlet_column = col
        # Momentum-consistent Neumann datum g = nu * d2(u_in)/dy2 folded into
        # the pressure right-hand side as 2 g / hx along the whole inlet-plane
        # column (walls included: on a no-slip node dp/dx reduces to the same
        # expression).  End rows use the one-sided second difference, exact
        # for parabolic profiles.
        g = np.empty(grid.ny)
        g[1:-1] = (col[2:] - 2.0 * col[1:-1] + col[:-2])
        g[0] = 2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3]
        g[-1] = 2.0 * col[-1] - 5.0 * col[-2] + 4.0 * col[-3] - col[-4]
        g *= self.nu / grid.hy**2
        self._inlet_rhs = 2.0 * g / grid.hx
        self._inlet_rows = rows

    @property
    def nu(self) -> float:
        """Dimensionless viscosity in channel-height/inlet-velocity units."""
        if self.nu_override is not None:
            return self.nu_override
        h = self.grid.geometry.step_height_ratio
        if h == 0.0:
            raise ValueError(
                "straight channel has no step to define the Reynolds number; "
                "set nu_override"
            )
        return h / self.re

    def validate(self) -> list[str]:
        """Soft parameter checks; returns (and logs) warning messages."""
        warnings = []
        if self.tau > 1.0:
            warnings.append(
                f"tau = {self.tau} violates the tau <= 1 heuristic "
                "(dissipative terms should stay below the convective ones)"
            )
        lower = self.grid.hx / self.cs_over_u0
        if 0.0 < self.tau < lower:
            warnings.append(
                f"tau = {self.tau} is below the perturbation-spreading bound "
                f"hx/c_s = {lower:.3g}"
            )
        diff_limit = 0.4 * self.grid.hx**2 / (4.0 * self.nu + 4.0 * self.tau)
        if self.dt > diff_limit:
            warnings.append(
                f"dt = {self.dt} exceeds the diffusive step guard {diff_limit:.3g}"
            )
        for message in warnings:
            log.warning(message)
        return warnings

    def direct_plan(self) -> _DirectPressurePlan:
        if self._plan is None:
            g = self.grid
            self._plan = _DirectPressurePlan(g.ny, g.nx, g.hx, g.hy)
        return self._plan


def initial_state(params: SolverParams, seed: int = 0,
                  perturbation: float = 1e-3) -> FlowState:
    """Inlet profile extended downstream, zero in the step shadow, plus a
    seeded perturbation of the vertical velocity in the shear layer."""
    grid = params.grid
    ux = np.tile(params._inlet_column[:, None], (1, grid.nx))
    uy = np.zeros(grid.shape)
    if perturbation:
        rng = np.random.default_rng(seed)
        band = 3
        j0 = max(1, grid.j_step - band)
        j1 = min(grid.ny - 1, grid.j_step + band + 1)
        noise = rng.uniform(-perturbation, perturbation, (j1 - j0, grid.nx - 2))
        uy[j0:j1, 1:-1] += noise
    p = np.zeros(grid.shape)
    state = FlowState(ux, uy, p, t=0.0)
    return impose_boundaries(state, grid, params)


def impose_boundaries(state: FlowState, grid: UniformGrid,
                      params: SolverParams | None = None) -> FlowState:
    """Re-impose inlet/wall/outlet values on the velocity, in place."""
    _apply_velocity_bc(state.ux, state.uy, grid, params)
    state.p[:, -1] = 0.0
    return state


def _apply_velocity_bc(ux, uy, grid, params=None):
    js = grid.j_step
    inlet = (params._inlet_column if params is not None
             else (np.arange(grid.ny) > js).astype(float))
    # outlet: zero-gradient copy of the upstream column over fluid rows
    ux[1:-1, -1] = ux[1:-1, -2]
    uy[1:-1, -1] = uy[1:-1, -2]
    if params is not None and params.outlet_flux_correction:
        # nudge the outlet flux toward the inlet flux; the regularizing terms
        # produce only a slow O(tau) drift, so the per-step authority is kept
        # small enough never to shock the outflow while vortices cross it
        q_in = np.trapezoid(inlet, dx=grid.hy)
        q_out = np.trapezoid(ux[:, -1], dx=grid.hy) \
            - 0.5 * grid.hy * (ux[0, -1] + ux[-1, -1])
        if abs(q_out) > 0.25 * abs(q_in) and q_in != 0.0:
            scale = min(max(q_in / q_out, 0.98), 1.02)
            ux[1:-1, -1] *= scale
    # channel walls
    for arr in (ux, uy):
        arr[0, :] = 0.0
        arr[-1, :] = 0.0
    if grid.has_solid:
        solid = grid.mask(CellKind.SOLID) | (grid.cell_kinds == CellKind.WALL)
        ux[solid] = 0.0
        uy[solid] = 0.0
    else:
        ux[: js + 1, 0] = 0.0
        uy[: js + 1, 0] = 0.0
    # inlet opening (walls already zeroed above/below it)
    ux[js + 1:-1, 0] = inlet[js + 1:-1]
    uy[js + 1:-1, 0] = 0.0


def _patch_inlet_advection(ux, uy, p, tau, ax, ay, wx, wy, params):
    """Evaluate a (and optionally w) on the inlet column, one-sided in x.

    The inflow values are prescribed, so the advective acceleration is well
    defined there; leaving it zero would misstate the pressure-equation
    right-hand side at the inlet.
    """
    grid = params.grid
    rows = params._inlet_rows
    if rows.size == 0:
        return
    hx, hy = grid.hx, grid.hy
    u0 = ux[rows, 0]
    v0 = uy[rows, 0]
    dudx = (ux[rows, 1] - u0) / hx
    dvdx = (uy[rows, 1] - v0) / hx
    dudy = (ux[rows + 1, 0] - ux[rows - 1, 0]) / (2.0 * hy)
    dvdy = (uy[rows + 1, 0] - uy[rows - 1, 0]) / (2.0 * hy)
    a0 = u0 * dudx + v0 * dudy
    b0 = u0 * dvdx + v0 * dvdy
    ax[rows, 0] = a0
    ay[rows, 0] = b0
    if wx is None:
        return
    dpdx = (p[rows, 1] - p[rows, 0]) / hx
    dpdy = (p[rows + 1, 0] - p[rows - 1, 0]) / (2.0 * hy)
    wx[rows, 0] = tau * (a0 + dpdx)
    wy[rows, 0] = tau * (b0 + dpdy)


def compute_w(state: FlowState, params: SolverParams) -> RegularizingVelocity:
    """Auxiliary velocity w = tau * ((u . grad) u + grad p).

    Zero on wall faces (no-slip kills the tensor products there anyway);
    one-sided on the inlet column, copied from the upstream column at the
    outlet so the dissipative fluxes stay non-reflecting.
    """
    grid = params.grid
    ax = np.empty(grid.shape)
    ay = np.empty(grid.shape)
    wx = np.empty(grid.shape)
    wy = np.empty(grid.shape)
    _kernels.acceleration_and_w(state.ux, state.uy, state.p, grid.cell_kinds,
                                params.tau, grid.hx, grid.hy, ax, ay, wx, wy)
    _patch_inlet_advection(state.ux, state.uy, state.p, params.tau,
                           ax, ay, wx, wy, params)
    wx[1:-1, -1] = wx[1:-1, -2]
    wy[1:-1, -1] = wy[1:-1, -2]
    return RegularizingVelocity(wx, wy)


def _check_dt_guard(params: SolverParams, umax: float):
    if params._dt_guard_warned or umax <= 0.0:
        return
    limit = 0.4 * min(params.grid.hx / umax,
                      params.grid.hx**2 / (4.0 * params.nu + 4.0 * params.tau))
    if params.dt > limit:
        log.warning(
            "dt = %g exceeds the stability guard %g (|u|max = %g); continuing",
            params.dt, limit, umax,
        )
        params._dt_guard_warned = True


def momentum_step(state: FlowState, w: RegularizingVelocity,
                  params: SolverParams) -> tuple[np.ndarray, np.ndarray]:
    """Explicit momentum predictor; returns provisional (ux*, uy*)."""
    grid = params.grid
    uxs = np.empty(grid.shape)
    uys = np.empty(grid.shape)
    _kernels.momentum_predictor(state.ux, state.uy, state.p, w.wx, w.wy,
                                grid.cell_kinds, params.nu, params.dt,
                                grid.hx, grid.hy, params.upwind, uxs, uys)
    _apply_velocity_bc(uxs, uys, grid, params)
    umax = _kernels.max_abs_velocity(uxs, uys)
    if not math.isfinite(umax):
        raise BlowUpError(f"momentum predictor produced NaN/Inf at t = {state.t:.6f}",
                          t=state.t)
    _check_dt_guard(params, umax)
    return uxs, uys


def solve_poisson_mixed(f, hx, hy, kinds=None, p0=None, outlet_values=None,
                        method="direct", tol=1e-10, max_iter=100_000,
                        omega=None, plan=None):
    """Solve lap(p) = f with mirrored-Neumann walls and a Dirichlet outlet.

    `f` covers every node; its last column is ignored (outlet column holds
    `outlet_values`, default 0).  The direct method factorizes the plain
    rectangle operator; `sor` runs red-black relaxation until the max-abs
    residual drops below `tol` and raises PressureConvergenceError when the
    iteration budget runs out.
    """
    ny, nx = f.shape
    rhs = np.ascontiguousarray(f[:, : nx - 1])
    if method == "direct":
        if kinds is not None and (kinds == CellKind.SOLID).any():
            raise GridError("direct pressure solve requires a solid-free rectangle")
        if plan is None:
            plan = _DirectPressurePlan(ny, nx, hx, hy)
        return plan.solve_rhs(rhs, outlet_values)
    if method != "sor":
        raise ValueError(f"unknown pressure method {method!r}")
    return _sor_solve(rhs, ny, nx, hx, hy, kinds, p0, outlet_values, tol,
                      max_iter, omega)


def _sor_solve(rhs, ny, nx, hx, hy, kinds, p0, outlet_values, tol, max_iter,
               omega):
    if kinds is None:
        kinds = np.zeros((ny, nx), dtype=np.uint8)
    p = np.zeros((ny, nx)) if p0 is None else p0.copy()
    p[:, -1] = 0.0 if outlet_values is None else outlet_values
    if omega is None:
        omega = 2.0 / (1.0 + math.sin(math.pi / max(nx, ny)))
    check_every = 4
    sweeps = 0
    residual = _kernels.poisson_residual(p, rhs, kinds, hx, hy)
    while residual > tol:
        if sweeps >= max_iter:
            raise PressureConvergenceError(
                f"pressure relaxation stopped at residual {residual:.3e} "
                f"after {sweeps} sweeps (tol {tol:.3e})",
                residual=residual, iterations=sweeps,
            )
        for _ in range(check_every):
            _kernels.sor_sweep(p, rhs, kinds, hx, hy, omega, 0)
            _kernels.sor_sweep(p, rhs, kinds, hx, hy, omega, 1)
        sweeps += check_every
        residual = _kernels.poisson_residual(p, rhs, kinds, hx, hy)
    return p


def _relax_pressure(rhs, grid, p0, outlet_values, tol, max_iter, omega):
    return _sor_solve(rhs, grid.ny, grid.nx, grid.hx, grid.hy,
                      grid.cell_kinds, p0, outlet_values, tol, max_iter, omega)


def pressure_solve(u_star, params: SolverParams, prev_p, advective=None,
                   outlet_p=None) -> np.ndarray:
    """Pressure from the discrete constraint tau * lap p = div(u* - tau a).

    `advective` optionally supplies the acceleration a = (u . grad) u used
    inside the constraint (defaults to zero).  With tau = 0 the call solves
    the classical projection increment dt * lap phi = div u* and returns
    prev_p + phi.
    """
    uxs, uys = u_star
    grid = params.grid
    tau = params.tau
    if advective is None:
        ax = np.zeros(grid.shape)
        ay = ax
    else:
        ax, ay = advective
    scale = tau if tau > 0.0 else params.dt
    rhs = np.empty((grid.ny, grid.nx - 1))
    _kernels.pressure_divergence(uxs, uys, ax, ay, grid.cell_kinds, tau,
                                 grid.hx, grid.hy, 1.0 / scale, rhs)
    if tau > 0.0:
        rhs[:, 0] += params._inlet_rhs

    method = params.pressure_method
    if method == "auto":
        method = "sor" if grid.has_solid else "direct"
    if method == "direct":
        solved = params.direct_plan().solve_rhs(rhs, outlet_p)
    else:
        solved = _relax_pressure(
            rhs, grid, p0=prev_p, outlet_values=outlet_p,
            tol=params.pressure_tol / scale, max_iter=params.pressure_max_iter,
            omega=params.sor_omega,
        )
    if tau > 0.0:
        return solved
    return prev_p + solved


def advance(state: FlowState, params: SolverParams) -> FlowState:
    """One full time step: w, momentum predictor, pressure, correction."""
    grid = params.grid
    ax = np.empty(grid.shape)
    ay = np.empty(grid.shape)
    wx = np.empty(grid.shape)
    wy = np.empty(grid.shape)
    _kernels.acceleration_and_w(state.ux, state.uy, state.p, grid.cell_kinds,
                                params.tau, grid.hx, grid.hy, ax, ay, wx, wy)
    _patch_inlet_advection(state.ux, state.uy, state.p, params.tau,
                           ax, ay, wx, wy, params)
    wx[1:-1, -1] = wx[1:-1, -2]
    wy[1:-1, -1] = wy[1:-1, -2]

    uxs = np.empty(grid.shape)
    uys = np.empty(grid.shape)
    _kernels.momentum_predictor(state.ux, state.uy, state.p, wx, wy,
                                grid.cell_kinds, params.nu, params.dt,
                                grid.hx, grid.hy, params.upwind, uxs, uys)
    _apply_velocity_bc(uxs, uys, grid, params)

    p_new = pressure_solve((uxs, uys), params, state.p, advective=(ax, ay))
    phi = p_new - state.p
    umax = _kernels.gradient_correction(uxs, uys, phi, grid.cell_kinds,
                                        params.dt, grid.hx, grid.hy)
    _apply_velocity_bc(uxs, uys, grid, params)

    t_new = state.t + params.dt
    # the fused kernels run fastmath and may skip NaNs in their max; a plain
    # sum catches NaN/Inf anywhere while huge-but-finite fields trip the
    # magnitude guard
    checksum = float(uxs.sum()) + float(uys.sum()) + float(p_new.sum())
    if not math.isfinite(umax) or not math.isfinite(checksum) \
            or umax > params.blowup_limit:
        raise BlowUpError(
            f"solution diverged at t = {t_new:.6f} (|u|max = {umax:.3e})",
            t=t_new,
        )
    _check_dt_guard(params, umax)
    return FlowState(uxs, uys, p_new, t_new)


def mass_flux_report(state: FlowState, grid: UniformGrid) -> dict:
    """Column-integrated streamwise flux at the inlet and outlet."""
    q_in = float(np.trapezoid(state.ux[:, 0], dx=grid.hy))
    q_out = float(np.trapezoid(state.ux[:, -1], dx=grid.hy))
    rel = abs(q_in - q_out) / abs(q_in) if q_in != 0.0 else math.inf
    return {"inlet_flux": q_in, "outlet_flux": q_out, "relative_imbalance": rel}
