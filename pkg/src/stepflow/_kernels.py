"""Compiled stencil kernels for the flow solver.

All kernels work on (ny, nx) node arrays; row index j runs along y,
column index i along x.  Nodes are classified by the uint8 `kinds` array
(see geometry.CellKind); updates touch FLUID nodes only, boundary values
are re-imposed by the caller after each sub-step.
"""

import numba
import numpy as np

FLUID = 0
SOLID = 1
INLET = 2
OUTLET = 3
WALL = 4

_jit = numba.njit(cache=True, fastmath=True)


@_jit
def advective_acceleration(ux, uy, kinds, hx, hy, ax, ay):
    """a = (u . grad) u by central differences; zero on non-fluid nodes."""
    ny, nx = ux.shape
    for j in range(ny):
        for i in range(nx):
            if kinds[j, i] == FLUID:
                dudx = (ux[j, i + 1] - ux[j, i - 1]) / (2.0 * hx)
                dudy = (ux[j + 1, i] - ux[j - 1, i]) / (2.0 * hy)
                dvdx = (uy[j, i + 1] - uy[j, i - 1]) / (2.0 * hx)
                dvdy = (uy[j + 1, i] - uy[j - 1, i]) / (2.0 * hy)
                ax[j, i] = ux[j, i] * dudx + uy[j, i] * dudy
                ay[j, i] = ux[j, i] * dvdx + uy[j, i] * dvdy
            else:
                ax[j, i] = 0.0
                ay[j, i] = 0.0


@_jit
def regularizing_velocity(ax, ay, p, kinds, tau, hx, hy, wx, wy):
    """w = tau * (a + grad p) at fluid nodes; zero elsewhere.

    The caller copies the upstream column onto the outlet afterwards.
    """
    ny, nx = p.shape
    for j in range(ny):
        for i in range(nx):
            if kinds[j, i] == FLUID:
                dpdx = (p[j, i + 1] - p[j, i - 1]) / (2.0 * hx)
                dpdy = (p[j + 1, i] - p[j - 1, i]) / (2.0 * hy)
                wx[j, i] = tau * (ax[j, i] + dpdx)
                wy[j, i] = tau * (ay[j, i] + dpdy)
            else:
                wx[j, i] = 0.0
                wy[j, i] = 0.0


@_jit
def acceleration_and_w(ux, uy, p, kinds, tau, hx, hy, ax, ay, wx, wy):
    """Fused single pass: a = (u . grad) u and w = tau * (a + grad p)."""
    ny, nx = ux.shape
    for j in range(ny):
        for i in range(nx):
            if kinds[j, i] == FLUID:
                dudx = (ux[j, i + 1] - ux[j, i - 1]) / (2.0 * hx)
                dudy = (ux[j + 1, i] - ux[j - 1, i]) / (2.0 * hy)
                dvdx = (uy[j, i + 1] - uy[j, i - 1]) / (2.0 * hx)
                dvdy = (uy[j + 1, i] - uy[j - 1, i]) / (2.0 * hy)
                a = ux[j, i] * dudx + uy[j, i] * dudy
                b = ux[j, i] * dvdx + uy[j, i] * dvdy
                ax[j, i] = a
                ay[j, i] = b
                dpdx = (p[j, i + 1] - p[j, i - 1]) / (2.0 * hx)
                dpdy = (p[j + 1, i] - p[j - 1, i]) / (2.0 * hy)
                wx[j, i] = tau * (a + dpdx)
                wy[j, i] = tau * (b + dpdy)
            else:
                ax[j, i] = 0.0
                ay[j, i] = 0.0
                wx[j, i] = 0.0
                wy[j, i] = 0.0


@_jit
def momentum_predictor(ux, uy, p, wx, wy, kinds, nu, dt, hx, hy,
                       blend, uxs, uys):
    """Explicit predictor u* = u + dt * (-div(u u) - grad p + nu lap u + div(u w + w u)).

    Advection is in divergence (face-flux) form; `blend` in [0, 1] mixes in
    first-order upwind fluxes (0 = pure central).  The dissipative tensor
    uses central differences of the node products u w.
    """
    ny, nx = ux.shape
    cen = 1.0 - blend
    for j in range(ny):
        for i in range(nx):
            if kinds[j, i] != FLUID:
                uxs[j, i] = ux[j, i]
                uys[j, i] = uy[j, i]
                continue

            uc = ux[j, i]
            vc = uy[j, i]
            ue = ux[j, i + 1]
            uw = ux[j, i - 1]
            un = ux[j + 1, i]
            us = ux[j - 1, i]
            ve = uy[j, i + 1]
            vw = uy[j, i - 1]
            vn = uy[j + 1, i]
            vs = uy[j - 1, i]

            # face-normal velocities
            ufe = 0.5 * (uc + ue)
            ufw = 0.5 * (uw + uc)
            vfn = 0.5 * (vc + vn)
            vfs = 0.5 * (vs + vc)

            # x-momentum advective fluxes
            fe = cen * 0.5 * (uc * uc + ue * ue)
            fw = cen * 0.5 * (uw * uw + uc * uc)
            fn = cen * 0.5 * (vc * uc + vn * un)
            fs = cen * 0.5 * (vs * us + vc * uc)
            if blend > 0.0:
                fe += blend * (ufe * uc if ufe > 0.0 else ufe * ue)
                fw += blend * (ufw * uw if ufw > 0.0 else ufw * uc)
                fn += blend * (vfn * uc if vfn > 0.0 else vfn * un)
                fs += blend * (vfs * us if vfs > 0.0 else vfs * uc)
            adv_u = (fe - fw) / hx + (fn - fs) / hy

            # y-momentum advective fluxes
            ge = cen * 0.5 * (uc * vc + ue * ve)
            gw = cen * 0.5 * (uw * vw + uc * vc)
            gn = cen * 0.5 * (vc * vc + vn * vn)
            gs = cen * 0.5 * (vs * vs + vc * vc)
            if blend > 0.0:
                ge += blend * (ufe * vc if ufe > 0.0 else ufe * ve)
                gw += blend * (ufw * vw if ufw > 0.0 else ufw * vc)
                gn += blend * (vfn * vc if vfn > 0.0 else vfn * vn)
                gs += blend * (vfs * vs if vfs > 0.0 else vfs * vc)
            adv_v = (ge - gw) / hx + (gn - gs) / hy

            dpdx = (p[j, i + 1] - p[j, i - 1]) / (2.0 * hx)
            dpdy = (p[j + 1, i] - p[j - 1, i]) / (2.0 * hy)

            lap_u = (ue - 2.0 * uc + uw) / (hx * hx) + (un - 2.0 * uc + us) / (hy * hy)
            lap_v = (ve - 2.0 * vc + vw) / (hx * hx) + (vn - 2.0 * vc + vs) / (hy * hy)

            # div(u w + w u), central on node products
            tx = ((2.0 * ue * wx[j, i + 1] - 2.0 * uw * wx[j, i - 1]) / (2.0 * hx)
                  + ((un * wy[j + 1, i] + vn * wx[j + 1, i])
                     - (us * wy[j - 1, i] + vs * wx[j - 1, i])) / (2.0 * hy))
            ty = (((ue * wy[j, i + 1] + ve * wx[j, i + 1])
                   - (uw * wy[j, i - 1] + vw * wx[j, i - 1])) / (2.0 * hx)
                  + (2.0 * vn * wy[j + 1, i] - 2.0 * vs * wy[j - 1, i]) / (2.0 * hy))

            uxs[j, i] = uc + dt * (-adv_u - dpdx + nu * lap_u + tx)
            uys[j, i] = vc + dt * (-adv_v - dpdy + nu * lap_v + ty)


@_jit
def pressure_divergence(uxs, uys, ax, ay, kinds, tau, hx, hy, inv_scale, out):
    """inv_scale * div(u* - tau a) on every pressure unknown.

    `out` covers the unknown columns only, shape (ny, nx - 1); the outlet
    column is Dirichlet data, not an unknown.  Fluid interior uses central
    differences; boundary nodes use no-slip mirror ghosts at walls and
    one-sided differences along the inlet normal.
    """
    ny, nx = uxs.shape
    for j in range(ny):
        for i in range(nx - 1):
            k = kinds[j, i]
            if k == SOLID:
                out[j, i] = 0.0
                continue

            # x-part of the divergence
            if i == 0:
                if k == INLET:
                    dx = ((uxs[j, 1] - tau * ax[j, 1])
                          - (uxs[j, 0] - tau * ax[j, 0])) / hx
                else:  # wall/corner on the step face
                    dx = (uxs[j, 1] - tau * ax[j, 1]) / hx
            elif kinds[j, i - 1] == SOLID:
                dx = (uxs[j, i + 1] - tau * ax[j, i + 1]) / hx
            else:
                dx = ((uxs[j, i + 1] - tau * ax[j, i + 1])
                      - (uxs[j, i - 1] - tau * ax[j, i - 1])) / (2.0 * hx)

            # y-part of the divergence
            if j == 0:
                dy = (uys[1, i] - tau * ay[1, i]) / hy
            elif j == ny - 1:
                dy = -(uys[ny - 2, i] - tau * ay[ny - 2, i]) / hy
            elif kinds[j - 1, i] == SOLID:
                dy = (uys[j + 1, i] - tau * ay[j + 1, i]) / hy
            else:
                dy = ((uys[j + 1, i] - tau * ay[j + 1, i])
                      - (uys[j - 1, i] - tau * ay[j - 1, i])) / (2.0 * hy)

            out[j, i] = (dx + dy) * inv_scale


@_jit
def _poisson_neighbor_sum(p, kinds, j, i, hx2, hy2):
    """Neighbor contribution for the mixed-BC 5-point stencil at (j, i).

    Missing/solid neighbors are mirrored (homogeneous Neumann); the outlet
    column is a Dirichlet neighbor read directly from the stored values.
    """
    ny, nx = p.shape
    s = 0.0
    # west
    if i == 0 or kinds[j, i - 1] == SOLID:
        s += p[j, i + 1] / hx2
    else:
        s += p[j, i - 1] / hx2
    # east (outlet column holds Dirichlet values)
    s += p[j, i + 1] / hx2
    # south
    if j == 0 or kinds[j - 1, i] == SOLID:
        s += p[j + 1, i] / hy2
    else:
        s += p[j - 1, i] / hy2
    # north
    if j == ny - 1 or kinds[j + 1, i] == SOLID:
        s += p[j - 1, i] / hy2
    else:
        s += p[j + 1, i] / hy2
    return s


@_jit
def sor_sweep(p, f, kinds, hx, hy, omega, color):
    """One red-black SOR half-sweep over the pressure unknowns."""
    ny, nx = p.shape
    hx2 = hx * hx
    hy2 = hy * hy
    diag = 2.0 / hx2 + 2.0 / hy2
    for j in range(ny):
        start = (j + color) % 2
        for i in range(start, nx - 1, 2):
            if kinds[j, i] == SOLID:
                continue
            s = _poisson_neighbor_sum(p, kinds, j, i, hx2, hy2)
            gs = (s - f[j, i]) / diag
            p[j, i] += omega * (gs - p[j, i])


@_jit
def poisson_residual(p, f, kinds, hx, hy):
    """Max-abs residual of the mixed-BC Laplacian against f."""
    ny, nx = p.shape
    hx2 = hx * hx
    hy2 = hy * hy
    diag = 2.0 / hx2 + 2.0 / hy2
    r = 0.0
    for j in range(ny):
        for i in range(nx - 1):
            if kinds[j, i] == SOLID:
                continue
            s = _poisson_neighbor_sum(p, kinds, j, i, hx2, hy2)
            res = s - diag * p[j, i] - f[j, i]
            if res < 0.0:
                res = -res
            if res > r:
                r = res
    return r


@_jit
def gradient_correction(ux, uy, phi, kinds, dt, hx, hy):
    """u <- u - dt * grad(phi) on fluid nodes, in place.

    Returns the largest corrected |component| so the caller can run its
    divergence guard without another field pass.  Divergence is caught by
    the magnitude guard well before floats overflow, so NaN handling is
    left to the caller's finiteness check.
    """
    ny, nx = ux.shape
    m = 0.0
    for j in range(ny):
        for i in range(nx):
            if kinds[j, i] == FLUID:
                u = ux[j, i] - dt * (phi[j, i + 1] - phi[j, i - 1]) / (2.0 * hx)
                v = uy[j, i] - dt * (phi[j + 1, i] - phi[j - 1, i]) / (2.0 * hy)
                ux[j, i] = u
                uy[j, i] = v
                a = abs(u)
                if a > m:
                    m = a
                b = abs(v)
                if b > m:
                    m = b
    return m


@_jit
def thomas_batch(rhs, wcoef, cprime, ainv_a, out):
    """Solve the per-mode tridiagonal systems (one row of rhs per y-mode).

    `wcoef` and `cprime` are the precomputed elimination coefficients,
    `ainv_a` is the constant sub-diagonal entry.
    """
    nk, m = rhs.shape
    for k in range(nk):
        out[k, 0] = rhs[k, 0] * wcoef[k, 0]
        for i in range(1, m):
            out[k, i] = (rhs[k, i] - ainv_a * out[k, i - 1]) * wcoef[k, i]
        for i in range(m - 2, -1, -1):
            out[k, i] -= cprime[k, i] * out[k, i + 1]


@numba.njit(cache=True)
def max_abs_velocity(ux, uy):
    """Largest |component| over both fields (NaN-propagating)."""
    ny, nx = ux.shape
    m = 0.0
    for j in range(ny):
        for i in range(nx):
            a = abs(ux[j, i])
            b = abs(uy[j, i])
            if a > m or a != a:
                m = a
            if b > m or b != b:
                m = b
    return m
