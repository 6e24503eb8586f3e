import math

import numpy as np
import pytest

from stepflow.diagnostics import (AveragedField, OnlineAverager, ProbeSeries,
                                  accumulate_average, bilinear_sample,
                                  mass_balance, near_wall_profile,
                                  reattachment_length, stream_function,
                                  trace_particles)
from stepflow.geometry import StepGeometry, build_grid
from stepflow.solver import FlowState


def make_grid(h=0.5, L=2.0, hx=0.05, step_x=0.0):
    return build_grid(StepGeometry(h, L, step_x=step_x), hx)


def make_state(grid, ux, uy=None, p=None, t=0.0):
    shape = grid.shape
    full = np.broadcast_to(ux, shape).astype(float).copy()
    uy = np.zeros(shape) if uy is None else np.broadcast_to(uy, shape).astype(float).copy()
    p = np.zeros(shape) if p is None else p
    return FlowState(full, uy, p, t)


class TestAveraging:
    def test_constant_field_is_fixed_point(self):
        grid = make_grid()
        snaps = [make_state(grid, 0.7, t=0.1 * k) for k in range(5)]
        avg = accumulate_average(snaps)
        assert np.allclose(avg.ux_av, 0.7, atol=0, rtol=0)
        assert avg.n_frames == 5

    def test_linear_in_time_field(self):
        # u(t) = t sampled at 0, 0.5, 1 averages to 0.5 exactly
        grid = make_grid()
        snaps = [make_state(grid, t, t=t) for t in (0.0, 0.5, 1.0)]
        avg = accumulate_average(snaps)
        assert np.allclose(avg.ux_av, 0.5, atol=1e-15)
        assert (avg.t1, avg.t2) == (0.0, 1.0)

    def test_millisecond_convention_window(self):
        # a 0.015-wide window assembled from step-aligned snapshots
        grid = make_grid()
        times = [60.0, 60.0075, 60.015]
        snaps = [make_state(grid, np.sin(t), t=t) for t in times]
        avg = accumulate_average(snaps)
        assert avg.t2 - avg.t1 == pytest.approx(0.015)

    def test_linearity(self):
        grid = make_grid()
        rng = np.random.default_rng(0)
        fields = [rng.standard_normal(grid.shape) for _ in range(4)]
        snaps = [FlowState(f, 0 * f, 0 * f, 0.5 * k)
                 for k, f in enumerate(fields)]
        scaled = [FlowState(3.0 * f, 0 * f, 0 * f, 0.5 * k)
                  for k, f in enumerate(fields)]
        a1 = accumulate_average(snaps).ux_av
        a3 = accumulate_average(scaled).ux_av
        assert np.abs(a3 - 3.0 * a1).max() < 1e-14

    def test_needs_two_snapshots(self):
        grid = make_grid()
        with pytest.raises(ValueError):
            accumulate_average([make_state(grid, 1.0)])

    def test_rejects_nonuniform_spacing(self):
        grid = make_grid()
        snaps = [make_state(grid, 1.0, t=t) for t in (0.0, 0.5, 1.2)]
        with pytest.raises(ValueError):
            accumulate_average(snaps)

    def test_online_averager_matches_batch(self):
        grid = make_grid()
        rng = np.random.default_rng(1)
        snaps = [FlowState(rng.standard_normal(grid.shape),
                           rng.standard_normal(grid.shape),
                           rng.standard_normal(grid.shape), 0.25 * k)
                 for k in range(7)]
        batch = accumulate_average(snaps)
        online = OnlineAverager()
        for s in snaps:
            online.add(s)
        streamed = online.result()
        assert np.abs(streamed.ux_av - batch.ux_av).max() < 1e-14
        assert np.abs(streamed.p_av - batch.p_av).max() < 1e-14
        assert streamed.n_frames == batch.n_frames


class TestStreamFunction:
    def test_uniform_flow(self):
        grid = make_grid()
        psi = stream_function(np.ones(grid.shape), grid)
        expected = np.tile(grid.y_coords[:, None], (1, grid.nx))
        assert np.abs(psi - expected).max() < 1e-14

    def test_parabolic_profile_antiderivative(self):
        # ux = 6 y (1 - y) integrates to 3 y^2 - 2 y^3
        grid = build_grid(StepGeometry(0.5, 2.0), 0.0125)
        y = grid.y_coords
        ux = np.tile((6.0 * y * (1.0 - y))[:, None], (1, grid.nx))
        psi = stream_function(ux, grid)
        exact = np.tile((3.0 * y**2 - 2.0 * y**3)[:, None], (1, grid.nx))
        err = np.abs(psi - exact).max()
        assert err < 2.0 * grid.hy**2  # composite trapezoid, f'' = O(10)

        coarse = build_grid(StepGeometry(0.5, 2.0), 0.025)
        yc = coarse.y_coords
        uxc = np.tile((6.0 * yc * (1.0 - yc))[:, None], (1, coarse.nx))
        err_c = np.abs(stream_function(uxc, coarse)
                       - np.tile((3.0 * yc**2 - 2.0 * yc**3)[:, None],
                                 (1, coarse.nx))).max()
        assert err_c / err == pytest.approx(4.0, rel=0.3)

    def test_derivative_recovers_velocity(self):
        def recovery_error(hx):
            grid = build_grid(StepGeometry(0.5, 2.0), hx)
            y = grid.y_coords
            ux = np.tile(np.sin(np.pi * y)[:, None], (1, grid.nx))
            psi = stream_function(ux, grid)
            dpsi = (psi[2:, :] - psi[:-2, :]) / (2.0 * grid.hy)
            return np.abs(dpsi - ux[1:-1, :]).max()

        err = recovery_error(0.0125)
        assert err < 4.0 * 0.0125**2
        assert recovery_error(0.025) / err == pytest.approx(4.0, rel=0.2)

    def test_commutes_with_averaging(self):
        grid = make_grid()
        rng = np.random.default_rng(2)
        snaps = [FlowState(rng.standard_normal(grid.shape),
                           np.zeros(grid.shape), np.zeros(grid.shape),
                           0.5 * k) for k in range(5)]
        avg = accumulate_average(snaps)
        psi_of_avg = stream_function(avg.ux_av, grid)
        psi_snaps = [FlowState(stream_function(s.ux, grid),
                               np.zeros(grid.shape), np.zeros(grid.shape),
                               s.t) for s in snaps]
        avg_of_psi = accumulate_average(psi_snaps).ux_av
        assert np.abs(psi_of_avg - avg_of_psi).max() < 1e-10


def averaged_from(ux, grid):
    return AveragedField(t1=0.0, t2=1.0, n_frames=2, ux_av=ux,
                         uy_av=np.zeros_like(ux), p_av=np.zeros_like(ux))


class TestReattachment:
    def test_uniform_forward_flow(self):
        grid = make_grid(L=4.0)
        avg = averaged_from(np.ones(grid.shape), grid)
        assert reattachment_length(avg, grid.geometry, grid) == 0.0

    def test_known_crossing_interpolated(self):
        grid = make_grid(L=4.0, hx=0.05)
        ux = np.ones(grid.shape)
        # near-wall backflow for x < 1.9, linear through zero between nodes
        x = grid.x_coords
        ux[1, :] = x - 1.9
        avg = averaged_from(ux, grid)
        expected = 1.9 / 0.5
        assert reattachment_length(avg, grid.geometry, grid) == pytest.approx(
            expected, abs=1e-12)

    def test_short_wiggle_is_ignored(self):
        grid = make_grid(L=4.0, hx=0.05)
        ux = np.ones(grid.shape)
        profile = np.ones(grid.nx)
        profile[10:30] = -0.5          # the real bubble: 20 nodes
        profile[40:42] = -0.1          # 2-node wiggle, below the run cutoff
        ux[1, :] = profile
        avg = averaged_from(ux, grid)
        l_s = reattachment_length(avg, grid.geometry, grid)
        # crossing taken from the 20-node run, not the wiggle
        x_cross = grid.x_coords[29] + 0.05 * (0.5 / 1.5)
        assert l_s == pytest.approx(x_cross / 0.5, abs=1e-12)

    def test_backflow_reaching_outlet_is_unbounded(self):
        grid = make_grid(L=4.0)
        ux = np.ones(grid.shape)
        ux[1, :] = -0.2
        avg = averaged_from(ux, grid)
        assert math.isinf(reattachment_length(avg, grid.geometry, grid))

    def test_mirrored_field_same_length(self):
        grid = make_grid(L=4.0, hx=0.05)
        ux = np.ones(grid.shape)
        ux[1, :] = grid.x_coords - 1.3
        avg = averaged_from(ux, grid)
        l_bottom = reattachment_length(avg, grid.geometry, grid)
        flipped = averaged_from(np.flipud(ux), grid)
        l_top = reattachment_length(flipped, grid.geometry, grid, wall="top")
        assert l_top == pytest.approx(l_bottom, abs=1e-14)

    def test_needs_a_step(self):
        grid = make_grid(h=0.0)
        avg = averaged_from(np.ones(grid.shape), grid)
        with pytest.raises(ValueError):
            reattachment_length(avg, grid.geometry, grid)

    def test_near_wall_profile_rows(self):
        field = np.arange(12.0).reshape(4, 3)
        assert np.array_equal(near_wall_profile(field), field[1])
        assert np.array_equal(near_wall_profile(field, "top"), field[2])


class TestParticleTracing:
    def test_uniform_flow_straight_line(self):
        grid = make_grid(L=2.0)
        state = make_state(grid, 1.0)
        trajs = trace_particles([state, FlowState(state.ux, state.uy,
                                                  state.p, 3.0)],
                                [(0.0, 0.75)], grid, dt=1e-2)
        traj = trajs[0]
        # moves with unit speed until the outlet, then freezes
        assert traj[:, 2].max() == pytest.approx(0.75)
        mid = traj[np.searchsorted(traj[:, 0], 1.0), 1]
        assert mid == pytest.approx(1.0, abs=1e-9)
        assert traj[-1, 1] <= grid.x_coords[-1] + 1e-12

    def test_zero_field_stationary(self):
        grid = make_grid()
        state = make_state(grid, 0.0)
        trajs = trace_particles([state, FlowState(state.ux, state.uy,
                                                  state.p, 1.0)],
                                [(0.8, 0.8)], grid, dt=1e-2)
        assert np.allclose(trajs[0][:, 1], 0.8)
        assert np.allclose(trajs[0][:, 2], 0.8)

    def test_solid_body_rotation_circle(self):
        grid = make_grid(L=2.0, hx=0.025)
        xc, yc = 1.0, 0.5
        X, Y = np.meshgrid(grid.x_coords, grid.y_coords)
        ux = -(Y - yc)
        uy = X - xc
        period = 2.0 * math.pi
        snaps = [FlowState(ux, uy, np.zeros_like(ux), t)
                 for t in np.arange(0.0, period + 0.5, 0.5)]
        r0 = 0.3
        trajs = trace_particles(snaps, [(xc + r0, yc)], grid, dt=1e-3)
        traj = trajs[0]
        r = np.hypot(traj[:, 1] - xc, traj[:, 2] - yc)
        assert abs(r[-1] - r0) / r0 < 0.01

    def test_seed_outside_domain_rejected(self):
        grid = make_grid()
        state = make_state(grid, 1.0)
        with pytest.raises(ValueError):
            trace_particles([state], [(5.0, 0.5)], grid)

    def test_seed_in_solid_rejected(self):
        grid = make_grid(step_x=1.0)
        state = make_state(grid, 1.0)
        with pytest.raises(ValueError):
            trace_particles([state], [(0.2, 0.2)], grid)

    def test_spacing_guard(self):
        grid = make_grid()
        s0 = make_state(grid, 1.0, t=0.0)
        s1 = make_state(grid, 1.0, t=0.7)
        s2 = make_state(grid, 1.0, t=1.4)
        with pytest.raises(ValueError, match="spacing"):
            trace_particles([s0, s1, s2], [(0.5, 0.75)], grid)


class TestSampling:
    def test_bilinear_exact_on_linear_field(self):
        grid = make_grid()
        X, Y = np.meshgrid(grid.x_coords, grid.y_coords)
        f = 2.0 * X - 3.0 * Y + 1.0
        assert bilinear_sample(f, grid, 0.513, 0.377) == pytest.approx(
            2.0 * 0.513 - 3.0 * 0.377 + 1.0, abs=1e-12)

    def test_probe_series_spacing_validated(self):
        with pytest.raises(ValueError):
            ProbeSeries(location=(1.0, 0.75),
                        t=np.array([0.0, 0.05, 0.11]),
                        ux=np.zeros(3), uy=np.zeros(3), sample_interval=0.05)


def test_mass_balance_uniform():
    grid = make_grid()
    report = mass_balance(np.ones(grid.shape), grid)
    assert report["relative_imbalance"] < 1e-14
    assert report["inlet_flux"] == pytest.approx(grid.y_coords[-1])
