import logging

import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import expm

from attractor import solve_equilibrium
from dynamics import (ModelParams, forcing_weights, galerkin_project, integrate, integrate_ensemble,
                      linear_propagator, observed_order, propagator_entries, second_time_derivative,
                      stable_dt, step)
from errors import DivergenceError, DomainError
from nonlinearity import NonlinearitySpec
from spectral import BOX, TORUS, GridSpec, StatePair, constant_field, energy_space_norm, mode_field, random_field


def params_on(grid, gamma=1.0, alpha=0.0, theta=0.5, nonlinearity=None, g=None):
    return ModelParams(gamma=gamma, alpha=alpha, g=g if g is not None else grid.zeros(), theta=theta,
                       nonlinearity=nonlinearity or NonlinearitySpec())


def generator(lam, mu):
    return np.array([[0.0, 1.0], [-lam, -mu]])


class TestModelParams:
    @pytest.mark.parametrize("kwargs", [dict(gamma=0.0), dict(gamma=-1.0), dict(alpha=-0.1), dict(theta=2.5)])
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(DomainError):
            params_on(GridSpec(1, 16), **kwargs)


class TestPropagator:
    @pytest.mark.parametrize("lam, mu, t", [
        (0.0, 0.0, 0.3),      # free mean mode
        (4.0, 1.0, 0.7),      # underdamped
        (1.0, 10.0, 0.5),     # overdamped
        (1.0, 2.0, 0.4),      # critically damped
        (1.0, 200.0, 1.0),    # strongly overdamped
        (100.0, 10.0, 1e-3),
    ])
    def test_matches_matrix_exponential(self, lam, mu, t):
        entries = propagator_entries(np.array([lam]), np.array([mu]), t)
        expected = expm(t * generator(lam, mu))
        got = np.array([[entries[0][0], entries[1][0]], [entries[2][0], entries[3][0]]])
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)

    def test_linear_propagator_uses_the_damping_symbol(self):
        params = params_on(GridSpec(1, 16), gamma=0.5, alpha=0.2, theta=0.75,
                           nonlinearity=NonlinearitySpec.linear(3.0))
        lam, mu = 9.0, 0.5 * 9.0 ** 0.75 + 0.2
        np.testing.assert_allclose(linear_propagator((3,), 0.1, params), expm(0.1 * generator(lam, mu)),
                                   rtol=1e-10)
        np.testing.assert_allclose(linear_propagator((3,), 0.1, params, with_linear_term=True),
                                   expm(0.1 * generator(lam + 3.0, mu)), rtol=1e-10)

    def test_linear_propagator_needs_positive_step(self):
        with pytest.raises(DomainError):
            linear_propagator((1,), 0.0, params_on(GridSpec(1, 16)))

    @pytest.mark.parametrize("lam, mu", [(0.0, 0.0), (4.0, 1.0), (1.0, 10.0)])
    def test_forcing_weights_are_the_duhamel_integrals(self, lam, mu):
        t = 0.3
        A = generator(lam, mu)
        i0, i1 = forcing_weights(np.array([lam]), np.array([mu]), t)
        exact0, _ = quad_vec(lambda s: expm((t - s) * A)[:, 1], 0.0, t, epsabs=1e-13)
        exact1, _ = quad_vec(lambda s: expm((t - s) * A)[:, 1] * s / t, 0.0, t, epsabs=1e-13)
        np.testing.assert_allclose(i0[0], exact0, atol=1e-11)
        np.testing.assert_allclose(i1[0], exact1, atol=1e-11)


class TestStepping:
    def test_linear_modes_are_propagated_exactly(self):
        grid = GridSpec(1, 32)
        params = params_on(grid, gamma=0.3, alpha=0.1, nonlinearity=NonlinearitySpec.zero())
        xi0 = StatePair(mode_field(grid, (3,), 2.0), mode_field(grid, (3,), -1.0))
        record = integrate(xi0, 1.0, 0.1, 10, params)
        P = linear_propagator((3,), 1.0, params)
        expected = P @ np.array([1.0, -0.5])
        final = record.final
        assert final.u.coeffs[3].real == pytest.approx(expected[0], rel=1e-12)
        assert final.v.coeffs[3].real == pytest.approx(expected[1], rel=1e-12)
        assert final.u.coeffs[5] == 0

    def test_linear_equilibrium_is_kept(self):
        grid = GridSpec(1, 16)
        params = params_on(grid, alpha=0.0, nonlinearity=NonlinearitySpec.linear(2.0),
                           g=constant_field(grid, 3.0))
        xi0 = StatePair(constant_field(grid, 1.5), grid.zeros())
        final = integrate(xi0, 2.0, 0.05, 40, params).final
        assert energy_space_norm(final - xi0.at(final.time)) < 1e-12

    def test_second_derivative_of_a_mode(self):
        grid = GridSpec(1, 16)
        params = params_on(grid, nonlinearity=NonlinearitySpec.zero())
        u = mode_field(grid, (2,))
        utt = second_time_derivative(StatePair(u, grid.zeros()), params)
        np.testing.assert_allclose(utt.coeffs, -4 * u.coeffs)

    def test_step_is_deterministic(self):
        grid = GridSpec(1, 32)
        params = params_on(grid)
        xi = StatePair(random_field(grid, 1, slope=-2.0), random_field(grid, 2, slope=-1.0))
        a, b = step(xi, 1e-2, params), step(xi, 1e-2, params)
        np.testing.assert_array_equal(a.u.coeffs, b.u.coeffs)
        assert a.time == pytest.approx(1e-2)

    def test_second_order_self_convergence(self):
        grid = GridSpec(1, 32)
        params = params_on(grid, gamma=0.5, alpha=0.1)
        xi0 = StatePair(random_field(grid, 7, slope=-2.0, amplitude=2.0), grid.zeros())
        errors, orders = observed_order(xi0, 0.5, 0.02, params, levels=3)
        assert np.all(errors > 0)
        assert orders[0] > 1.8

    @pytest.mark.parametrize("dt", [1e-2, 5e-2])
    def test_nonlinear_equilibrium_is_kept(self, dt):
        grid = GridSpec(1, 32)
        params = params_on(grid, alpha=0.1, g=mode_field(grid, (1,)))
        u = solve_equilibrium(mode_field(grid, (1,), 0.5), params, tol=1e-12).u
        xi = StatePair(u, grid.zeros())
        assert energy_space_norm(step(xi, dt, params) - xi) < 1e-10

    def test_restarting_repeats_the_run(self):
        grid = GridSpec(1, 32)
        params = params_on(grid, alpha=0.1, g=mode_field(grid, (1,)))
        xi0 = StatePair(random_field(grid, 4, slope=-2.0), random_field(grid, 5, slope=-1.0))
        whole = integrate(xi0, 1.0, 1e-2, 100, params).final
        half = integrate(xi0, 0.5, 1e-2, 50, params).final
        halves = integrate(half, 0.5, 1e-2, 50, params).final
        np.testing.assert_array_equal(halves.u.coeffs, whole.u.coeffs)
        np.testing.assert_array_equal(halves.v.coeffs, whole.v.coeffs)
        assert halves.time == pytest.approx(1.0)


class TestIntegrate:
    def test_sample_times(self):
        grid = GridSpec(1, 16)
        record = integrate(StatePair.zeros(grid), 1.0, 0.1, 3, params_on(grid))
        np.testing.assert_allclose(record.times, [0.0, 0.3, 0.6, 0.9, 1.0])
        assert len(record.states) == len(record.ledger.rows) == 5
        assert record.meta.steps == 10

    @pytest.mark.parametrize("T, dt, stride", [(1.0, 0.3, 1), (-1.0, 0.1, 1), (1.0, 0.1, 0)])
    def test_rejects_bad_schedules(self, T, dt, stride):
        grid = GridSpec(1, 16)
        with pytest.raises(DomainError):
            integrate(StatePair.zeros(grid), T, dt, stride, params_on(grid))

    def test_grids_must_agree(self):
        with pytest.raises(DomainError):
            integrate(StatePair.zeros(GridSpec(1, 32)), 0.1, 0.1, 1, params_on(GridSpec(1, 16)))

    def test_divergence_keeps_the_partial_record(self):
        grid = GridSpec(1, 16)
        params = params_on(grid, nonlinearity=NonlinearitySpec(0.0, 0.0, -1.0))
        xi0 = StatePair(constant_field(grid, 10.0), grid.zeros())
        with pytest.raises(DivergenceError) as info:
            integrate(xi0, 1.0, 1e-3, 1, params)
        assert info.value.partial is not None
        assert len(info.value.partial.states) >= 1
        assert info.value.time > 0

    def test_warns_above_the_stability_budget(self, caplog):
        grid = GridSpec(1, 16)
        params = params_on(grid)
        xi0 = StatePair(constant_field(grid, 2.0), grid.zeros())
        assert stable_dt(xi0, params) == pytest.approx(0.5 / 81)
        with caplog.at_level(logging.WARNING, logger="dynamics"):
            integrate(xi0, 0.1, 0.01, 5, params)
        assert "stability budget" in caplog.text

    def test_ensemble_matches_serial_runs(self):
        grid = GridSpec(1, 32)
        params = params_on(grid)
        states = [StatePair(random_field(grid, s, slope=-2.0), grid.zeros()) for s in range(3)]
        serial = integrate_ensemble(states, 0.2, 0.01, 5, params, workers=1)
        pooled = integrate_ensemble(states, 0.2, 0.01, 5, params, workers=3)
        for a, b in zip(serial, pooled):
            np.testing.assert_array_equal(a.final.u.coeffs, b.final.u.coeffs)


class TestGalerkin:
    def test_drops_high_modes(self):
        grid = GridSpec(1, 32)
        xi = StatePair(mode_field(grid, (2,)) + mode_field(grid, (6,)), mode_field(grid, (7,)))
        low = galerkin_project(xi, 4)
        np.testing.assert_allclose(low.u.coeffs, mode_field(grid, (2,)).coeffs)
        assert np.all(low.v.coeffs == 0)

    def test_cutoff_range(self):
        with pytest.raises(DomainError):
            galerkin_project(StatePair.zeros(GridSpec(1, 16)), 9)

    @pytest.mark.parametrize("kind", [TORUS, BOX])
    def test_projection_is_idempotent(self, kind):
        grid = GridSpec(1, 16, kind)
        xi = StatePair(random_field(grid, 1), random_field(grid, 2))
        once = galerkin_project(xi, 3)
        twice = galerkin_project(once, 3)
        np.testing.assert_array_equal(once.u.coeffs, twice.u.coeffs)
        np.testing.assert_array_equal(once.v.coeffs, twice.v.coeffs)

    @pytest.mark.parametrize("kind, M", [(TORUS, 8), (BOX, 16)])
    def test_full_cutoff_is_the_identity(self, kind, M):
        grid = GridSpec(1, 16, kind)
        xi = StatePair(random_field(grid, 3), random_field(grid, 4))
        full = galerkin_project(xi, M)
        np.testing.assert_array_equal(full.u.coeffs, xi.u.coeffs)
        np.testing.assert_array_equal(full.v.coeffs, xi.v.coeffs)

    def test_commutes_with_the_linear_flow(self):
        grid = GridSpec(1, 32)
        params = params_on(grid, gamma=0.5, alpha=0.2, nonlinearity=NonlinearitySpec.zero())
        xi = StatePair(random_field(grid, 5, slope=-1.0), random_field(grid, 6, slope=-1.0))
        flowed = galerkin_project(integrate(xi, 0.5, 0.05, 10, params).final, 4)
        projected = integrate(galerkin_project(xi, 4), 0.5, 0.05, 10, params).final
        np.testing.assert_allclose(flowed.u.coeffs, projected.u.coeffs, atol=1e-14)
        np.testing.assert_allclose(flowed.v.coeffs, projected.v.coeffs, atol=1e-14)
