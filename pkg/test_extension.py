import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynamics import ModelParams, integrate
from errors import DomainError, UnsupportedDomainError
from extension import (ExtensionSpec, auxiliary_field, commutator_check, dirichlet_regularity_check, ext_apply,
                       ext_norm_continuity, extended_seminorm, odd_defect, restrict)
from nonlinearity import NonlinearitySpec
from spectral import BOX, GridSpec, StatePair, mode_field, random_field


@pytest.fixture
def box():
    return GridSpec(1, 8, BOX)


class TestExtension:
    def test_target_keeps_the_spacing(self, box):
        spec = ExtensionSpec.for_grid(box)
        assert spec.target.n == 18
        assert spec.target.is_torus

    def test_only_from_the_box(self):
        with pytest.raises(UnsupportedDomainError):
            ExtensionSpec.for_grid(GridSpec(1, 8))

    def test_sine_mode_extends_to_itself(self, box):
        ext = ext_apply(mode_field(box, (3,)))
        np.testing.assert_allclose(ext.values(), np.sin(3 * ext.grid.points), atol=1e-12)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_restriction_inverts_and_extension_is_odd(self, dim):
        grid = GridSpec(dim, 8, BOX)
        u = random_field(grid, 4)
        spec = ExtensionSpec.for_grid(grid)
        ext = ext_apply(u, spec)
        assert odd_defect(ext) < 1e-14
        np.testing.assert_allclose(restrict(ext, spec).coeffs, u.coeffs, atol=1e-14)

    def test_cosine_is_not_odd(self):
        assert odd_defect(mode_field(GridSpec(1, 16), (2,))) == pytest.approx(1.0)
        with pytest.raises(UnsupportedDomainError):
            odd_defect(GridSpec(1, 8, BOX).zeros())

    def test_grids_are_checked(self, box):
        spec = ExtensionSpec.for_grid(box)
        with pytest.raises(DomainError):
            ext_apply(GridSpec(1, 10, BOX).zeros(), spec)
        with pytest.raises(DomainError):
            restrict(GridSpec(1, 16).zeros(), spec)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-3.0, 3.0), b=st.floats(-3.0, 3.0), seed=st.integers(0, 100))
    def test_extension_is_linear(self, a, b, seed):
        box = GridSpec(1, 8, BOX)
        u, v = random_field(box, seed), random_field(box, seed + 1, slope=-1.0)
        combined = ext_apply(u * a + v * b)
        np.testing.assert_allclose(combined.coeffs, (ext_apply(u) * a + ext_apply(v) * b).coeffs, atol=1e-12)


class TestNorms:
    @pytest.mark.parametrize("dim", [1, 2])
    @pytest.mark.parametrize("s", [-1.0, 0.0, 0.5, 2.0])
    def test_norm_ratio_is_a_power_of_two(self, dim, s):
        u = random_field(GridSpec(dim, 8, BOX), 2, slope=-1.0)
        assert ext_norm_continuity(u, s) == pytest.approx(2 ** (dim / 2), rel=1e-10)

    def test_norm_ratio_arguments(self, box):
        with pytest.raises(DomainError):
            ext_norm_continuity(mode_field(box, (1,)), 2.5)
        with pytest.raises(DomainError):
            ext_norm_continuity(box.zeros(), 0.5)

    def test_laplacian_commutes_with_extension(self, box):
        assert commutator_check(random_field(box, 6, slope=-1.0)) < 1e-10

    def test_extended_seminorm_of_a_sine(self, box):
        k = 2
        assert extended_seminorm(mode_field(box, (k,))) == pytest.approx(k ** 3 * math.pi / 2, rel=1e-2)


class TestAuxiliary:
    def test_auxiliary_field_of_a_mode(self, box):
        params = ModelParams(gamma=1.0, alpha=0.0, g=box.zeros())
        xi = StatePair(box.zeros(), mode_field(box, (2,)))
        np.testing.assert_allclose(auxiliary_field(xi, params).coeffs, mode_field(box, (2,), 0.5).coeffs)

    def test_regularity_check_is_for_box_runs(self):
        grid = GridSpec(1, 16)
        params = ModelParams(gamma=1.0, alpha=0.1, g=grid.zeros())
        traj = integrate(StatePair.zeros(grid), 1.0, 0.1, 1, params)
        with pytest.raises(UnsupportedDomainError):
            dirichlet_regularity_check([traj], [0.0])

    @pytest.mark.slow
    def test_relaxed_box_run_passes(self, box):
        params = ModelParams(gamma=1.0, alpha=1.0, g=mode_field(box, (1,)), nonlinearity=NonlinearitySpec.linear(1.0))
        traj = integrate(StatePair(random_field(box, 3, slope=-2.0), box.zeros()), 10.0, 0.025, 1, params)
        fit = dirichlet_regularity_check([traj], [6.0, 8.0])
        assert fit.passed, fit.notes
        assert fit.constants["extended_margin_min"] > 0
        assert 0 < fit.constants["C_auxiliary"] < math.inf
