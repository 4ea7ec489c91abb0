"""Runge-Kutta scheme properties and the iteration loop contract."""

import numpy as np
import pytest

from fdns.diagnostics import make_collector, mean_density, taylor_green_init
from fdns.mesh import reduce_sum
from fdns.physics import PhysicalConstants, Residual, SolverDivergenceError
from fdns.plan import ResidualEvaluator
from fdns.timeloop import (RK3_ALPHA, IterationState, RKScheme,
                           advance_iteration, run)
from helpers import cube, quiescent_state, rel_linf

CONSTANTS = PhysicalConstants()


def scalar_step(u0, z, alpha=RK3_ALPHA):
    """One save-state RK step of the linear test du/dt = lambda*u, with
    z = lambda*dt, mirroring the field update structure exactly."""
    u = u0
    for a in alpha:
        u = u0 + a * z * u
    return u


def scalar_step_nonlinear(u0, dt, f, alpha=RK3_ALPHA):
    u = u0
    for a in alpha:
        u = u0 + a * dt * f(u)
    return u


class TestRKScheme:
    def test_defaults(self):
        s = RKScheme(dt=0.1)
        assert s.stages == 3
        assert s.alpha == (1.0 / 3.0, 0.5, 1.0)

    def test_invalid_dt(self):
        with pytest.raises(ValueError):
            RKScheme(dt=0.0)

    def test_final_stage_must_reach_full_step(self):
        with pytest.raises(ValueError):
            RKScheme(dt=0.1, alpha=(0.5, 0.5, 0.5))

    def test_stability_polynomial(self):
        # closed form of the save-state composition:
        # 1 + z + z^2/2 + z^3/6
        for z in (0.05, -0.3, 0.5 + 0.2j, -1.0 + 1.0j):
            exact = 1.0 + z + z ** 2 / 2.0 + z ** 3 / 6.0
            got = scalar_step(1.0, z)
            assert abs(got - exact) <= 1e-13 * max(1.0, abs(exact))

    def test_temporal_order_on_nonlinear_problem(self):
        # du/dt = -u^2 + sin(t)-like autonomous surrogate; exact reference
        # from a very fine integration with the same scheme
        def f(u):
            return -u * u + np.cos(u)

        t_end = 1.0

        def integrate(steps):
            u = 0.3
            dt = t_end / steps
            for _ in range(steps):
                u = scalar_step_nonlinear(u, dt, f)
            return u

        ref = integrate(1 << 16)
        errs = [abs(integrate(n) - ref) for n in (32, 64, 128)]
        for e0, e1 in zip(errs, errs[1:]):
            assert e0 / e1 >= 4.0  # order >= 2


class TestIterationLoop:
    def test_quiescent_state_unchanged(self):
        grid = cube(8)
        state = quiescent_state(grid, CONSTANTS)
        before = [f.interior.copy() for f in state.conservative]
        evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
        run(state, RKScheme(dt=1e-2), evaluator, 2)
        for f, b in zip(state.conservative, before):
            assert np.array_equal(f.interior, b)

    def test_zero_iterations(self):
        grid = cube(8)
        state = quiescent_state(grid, CONSTANTS)
        before = [f.interior.copy() for f in state.conservative]
        evaluator = ResidualEvaluator(grid, CONSTANTS, "RA")
        report = run(state, RKScheme(dt=1e-2), evaluator, 0)
        assert report.iterations == 0
        assert report.records == []
        for f, b in zip(state.conservative, before):
            assert np.array_equal(f.interior, b)

    def test_save_state_snapshot(self):
        grid = cube(8)
        state = taylor_green_init(grid, CONSTANTS)
        it = IterationState(state)
        it.save_state()
        for saved, cons in zip(it.saved, state.conservative):
            assert np.array_equal(saved.data, cons.data)

    def test_single_step_cross_plan_agreement(self):
        grid = cube(16)
        scheme = RKScheme(dt=6.77e-3)
        finals = {}
        for name in ("BL", "SS"):
            state = taylor_green_init(grid, CONSTANTS)
            it = IterationState(state)
            res = Residual(grid)
            evaluator = ResidualEvaluator(grid, CONSTANTS, name)
            advance_iteration(it, scheme, evaluator, res)
            finals[name] = [f.interior.copy() for f in state.conservative]
        for a, b in zip(finals["BL"], finals["SS"]):
            assert rel_linf(a, b) <= 1e-12

    def test_bitwise_reproducible(self):
        grid = cube(16)
        runs = []
        for _ in range(2):
            state = taylor_green_init(grid, CONSTANTS)
            evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
            run(state, RKScheme(dt=6.77e-3), evaluator, 3)
            runs.append([f.interior.copy() for f in state.conservative])
        for a, b in zip(*runs):
            assert np.array_equal(a, b)

    def test_mass_conservation_short_run(self):
        grid = cube(16)
        state = taylor_green_init(grid, CONSTANTS)
        m0 = reduce_sum(state.rho)
        evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
        run(state, RKScheme(dt=6.77e-3), evaluator, 20)
        assert abs(reduce_sum(state.rho) - m0) <= 1e-10 * abs(m0)

    def test_diagnostics_cadence(self):
        grid = cube(16)
        state = taylor_green_init(grid, CONSTANTS)
        rho0 = mean_density(state)
        evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
        report = run(state, RKScheme(dt=6.77e-3), evaluator, 6,
                     cadence=2, collect=make_collector(grid, rho0))
        # samples at iterations 0, 2, 4, 6
        assert len(report.records) == 4
        times = [r.time for r in report.records]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(6 * 6.77e-3, rel=1e-12)

    def test_divergence_reported_with_location(self):
        grid = cube(8)
        state = taylor_green_init(grid, CONSTANTS)
        evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
        # absurd time step blows the solution up quickly
        with pytest.raises(SolverDivergenceError) as err:
            run(state, RKScheme(dt=50.0), evaluator, 50, cadence=1)
        assert err.value.iteration is not None

    def test_timing_covers_loop_only(self):
        grid = cube(8)
        state = quiescent_state(grid, CONSTANTS)
        evaluator = ResidualEvaluator(grid, CONSTANTS, "SS")
        report = run(state, RKScheme(dt=1e-3), evaluator, 2)
        assert report.loop_seconds > 0.0
        assert report.completed
