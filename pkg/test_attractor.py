import math

import numpy as np
import pytest

from attractor import (AbsorbingBall, AttractorSample, EquilibriumSet, absorbing_radius, attraction_distance,
                       box_counting_dimension, box_counts, equilibria_in_sample, equilibrium_residual,
                       find_equilibria, hausdorff_semidist, line_sample, lipschitz_ensemble, low_mode_coordinates,
                       sample_attractor, sample_in_ball, smoothing_map_lipschitz, solve_equilibrium, stability_tag,
                       winding_torus_sample)
from dynamics import ModelParams, integrate
from errors import DomainError
from nonlinearity import NonlinearitySpec, f_eval
from spectral import GridSpec, StatePair, energy_space_norm, frac_laplacian_apply, l2_norm_sq, mode_field, random_field


@pytest.fixture
def grid():
    return GridSpec(1, 32)


class TestBoxCounting:
    def test_segment_has_dimension_one(self):
        fit = box_counting_dimension(line_sample())
        assert fit.constants["dimension"] == pytest.approx(1.0, abs=0.15)
        np.testing.assert_array_equal(fit.lhs, 2.0 ** np.arange(1, 7))

    @pytest.mark.slow
    def test_winding_fills_the_torus(self):
        fit = box_counting_dimension(winding_torus_sample())
        assert fit.constants["dimension"] == pytest.approx(2.0, abs=0.2)

    def test_counts_of_a_single_point(self):
        np.testing.assert_array_equal(box_counts(np.zeros((5, 3)), [1, 2, 3]), [1, 1, 1])

    @pytest.mark.parametrize("scales", [(1, 2), (-1, 4)])
    def test_scale_range(self, scales):
        with pytest.raises(DomainError):
            box_counting_dimension(line_sample(), scales=scales)

    def test_needs_enough_samples(self):
        with pytest.raises(DomainError):
            box_counting_dimension(line_sample(100))

    def test_projection_width(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.0, g=grid.zeros())
        sample = AttractorSample(params, [StatePair.zeros(grid)] * 1000, 0.0, 1)
        with pytest.raises(DomainError):
            box_counting_dimension(sample, m=9)

    def test_expected_dimension_is_enforced(self):
        assert box_counting_dimension(line_sample(), expected=1.0).passed
        fit = box_counting_dimension(line_sample(), expected=2.0)
        assert not fit.passed
        assert fit.constants["accept_low"] == pytest.approx(1.8)


class TestLowModes:
    def test_cosine_lands_on_the_first_real_mode(self, grid):
        coords = low_mode_coordinates([StatePair(mode_field(grid, (1,)), grid.zeros())], 3)
        assert coords.shape == (1, 6)
        np.testing.assert_allclose(coords[0], [0.0, math.sqrt(math.pi), 0.0, 0.0, 0.0, 0.0], atol=1e-14)


class TestEquilibria:
    def test_linear_problem_solves_in_one_step(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.0, g=mode_field(grid, (1,)),
                             nonlinearity=NonlinearitySpec.linear(1.0))
        report = solve_equilibrium(grid.zeros(), params)
        np.testing.assert_allclose(report.u.coeffs, mode_field(grid, (1,), 0.5).coeffs, atol=1e-10)
        assert report.iterations <= 2
        assert stability_tag(report.u, params) == "stable"

    def test_quintic_origin_is_neutral(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.0, g=grid.zeros())
        found = find_equilibria([grid.zeros()], params)
        assert len(found) == 1
        assert found.members[0].stability == "neutral"

    def test_duplicates_collapse(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.0, g=mode_field(grid, (2,)),
                             nonlinearity=NonlinearitySpec(1.0, 0.0, 1.0))
        found = find_equilibria([grid.zeros(), mode_field(grid, (2,), 0.2)], params)
        assert len(found) == 1
        assert found.to_dict()["count"] == 1

    def test_rejects_non_equilibria(self, grid):
        with pytest.raises(DomainError):
            EquilibriumSet().add(grid.zeros(), 1e-3, "stable")

    def test_newton_converges_quadratically(self, grid):
        spec = NonlinearitySpec()
        w = mode_field(grid, (1,))
        g = (frac_laplacian_apply(w, 1.0) + f_eval(spec, w)).project()
        params = ModelParams(gamma=1.0, alpha=0.0, g=g, nonlinearity=spec)
        guess = w + random_field(grid, 7, slope=-2.0, amplitude=1e-3)
        report = solve_equilibrium(guess, params, tol=1e-12)
        r = report.residuals
        assert r[1] <= 100.0 * r[0] ** 2
        assert report.iterations <= 5
        assert report.halvings == 0
        np.testing.assert_allclose(report.u.coeffs, w.coeffs, atol=1e-10)
        assert math.sqrt(l2_norm_sq(equilibrium_residual(report.u, params))) <= 1e-12


def relaxing_params(grid):
    """f(u) = u, g = cos x, gamma = alpha = 1: every run relaxes to u = cos(x) / 2"""
    return ModelParams(gamma=1.0, alpha=1.0, g=mode_field(grid, (1,)), nonlinearity=NonlinearitySpec.linear(1.0))


def relaxing_runs(grid, seeds, T, dt=0.05, stride=4):
    params = relaxing_params(grid)
    runs = [integrate(StatePair(random_field(grid, s, slope=-2.0), grid.zeros()), T, dt, stride, params)
            for s in seeds]
    return params, runs


def point_sample(params, u, burn_in=5.0):
    return AttractorSample(params, [StatePair(u, u.grid.zeros())], burn_in, 1)


class TestAttraction:
    def test_runs_approach_the_rest_state(self, grid):
        params, runs = relaxing_runs(grid, (1, 5), T=10.0)
        fit = attraction_distance(runs, point_sample(params, mode_field(grid, (1,), 0.5)))
        assert fit.passed, fit.notes
        assert fit.constants["after"] == 5.0
        assert fit.constants["final_distance"] < fit.lhs[0]

    def test_far_sample_is_not_attracting(self, grid):
        params, runs = relaxing_runs(grid, (1,), T=10.0)
        fit = attraction_distance(runs, point_sample(params, mode_field(grid, (3,))))
        assert not fit.passed
        assert any("final distance" in n for n in fit.notes)

    def test_needs_shared_times(self, grid):
        params, short = relaxing_runs(grid, (1,), T=1.0)
        _, long = relaxing_runs(grid, (2,), T=2.0)
        sample = point_sample(params, mode_field(grid, (1,), 0.5))
        with pytest.raises(DomainError):
            attraction_distance(short + long, sample)
        with pytest.raises(DomainError):
            attraction_distance([], sample)

    def test_equilibria_lie_in_the_sample(self, grid):
        params = relaxing_params(grid)
        found = find_equilibria([grid.zeros()], params)
        assert equilibria_in_sample(found, point_sample(params, mode_field(grid, (1,), 0.5)), 1e-6).passed
        fit = equilibria_in_sample(found, point_sample(params, mode_field(grid, (3,))))
        assert not fit.passed
        assert fit.constants["equilibria"] == 1
        with pytest.raises(DomainError):
            equilibria_in_sample(EquilibriumSet(), point_sample(params, grid.zeros()))

    def test_sample_inside_the_ball(self, grid):
        params = ModelParams(gamma=1.0, alpha=1.0, g=grid.zeros())
        sample = point_sample(params, mode_field(grid, (1,)))
        norm = energy_space_norm(sample.states[0])
        assert sample_in_ball(sample, AbsorbingBall(norm, [], 0.0)).passed
        fit = sample_in_ball(sample, AbsorbingBall(0.5 * norm, [], 0.0))
        assert not fit.passed
        assert fit.constants["max_norm"] == pytest.approx(norm)


class TestSets:
    def test_hausdorff_semidistance(self, grid):
        a = StatePair(mode_field(grid, (1,)), grid.zeros())
        b = StatePair(mode_field(grid, (2,)), grid.zeros())
        assert hausdorff_semidist([a], [a, b]) == pytest.approx(0.0, abs=1e-12)
        assert hausdorff_semidist([a], [b]) == pytest.approx(energy_space_norm(a - b))
        with pytest.raises(DomainError):
            hausdorff_semidist([], [a])

    def test_absorbing_radius_covers_the_tails(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.1, g=mode_field(grid, (1,)))
        trajs = [integrate(StatePair(random_field(grid, s, slope=-2.0, amplitude=2.0), grid.zeros()),
                           2.0, 1e-2, 10, params) for s in range(2)]
        ball = absorbing_radius(trajs)
        assert ball.radius >= max(t.norms(1.0)[-1] for t in trajs)
        assert all(math.isfinite(e) for e in ball.entry_times)

    def test_sample_keeps_states_after_burn_in(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.1, g=mode_field(grid, (1,)))
        initial = [StatePair(random_field(grid, 3, slope=-2.0), grid.zeros())]
        sample = sample_attractor(initial, params, burn_in=0.5, duration=0.5, dt=1e-2, stride=10)
        assert len(sample.states) == 6
        assert all(xi.time >= 0.5 - 1e-9 for xi in sample.states)
        assert sample.radius() > 0

    def test_lipschitz_needs_distinct_states(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.1, g=grid.zeros())
        xi = StatePair(random_field(grid, 3, slope=-2.0), grid.zeros())
        with pytest.raises(DomainError):
            smoothing_map_lipschitz(xi, xi, params, 1e-2)

    def test_lipschitz_limit(self, grid):
        params = ModelParams(gamma=1.0, alpha=0.1, g=grid.zeros())
        xi = StatePair(random_field(grid, 3, slope=-2.0), grid.zeros())
        pairs = [(xi, xi + StatePair(random_field(grid, 4, slope=-2.0, amplitude=1e-3), grid.zeros()))]
        fit = lipschitz_ensemble(pairs, params, 1e-2)
        assert fit.passed
        assert 0 < fit.constants["L"] <= fit.tolerance
        assert not lipschitz_ensemble(pairs, params, 1e-2, limit=1e-12).passed
