import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle_values as O
from conftest import band_limited
from tidal_kdv import (
    ConvergenceError,
    Field,
    Grid,
    ParameterError,
    SchrodingerProblem,
    SpectralConditionError,
    StepProfile,
    compute_alpha,
    compute_hkappa_functional,
    diagonal_green,
    greens_ode_residual,
    hilbert_schmidt_check,
    jost_pair,
    kdv_hamiltonian,
    momentum,
    periodize,
    verify_linear_identity,
    verify_quadratic_identity,
)
from tidal_kdv.schrodinger import (
    free_resolvent_kernel,
    green_of,
    greens_tail_remainder,
    quadratic_by_convolution,
    quadratic_symbol,
    series_parameter,
    translation_covariance_check,
)
from tidal_kdv.spectral_grid import hs_kappa_norm


def problem(grid, values, kappa, **kw):
    return SchrodingerProblem(Field(grid, values), kappa, **kw)


class TestFreeKernel:
    @pytest.mark.parametrize("kappa, expected", [(1.0, 0.5), (2.0, 0.25)])
    def test_diagonal(self, kappa, expected):
        assert free_resolvent_kernel(0.3, 0.3, kappa) == expected

    def test_off_diagonal(self):
        assert free_resolvent_kernel(0.0, np.log(2), 2.0) == pytest.approx(O.FREE_KERNEL_K2_LN2, rel=1e-15)


class TestDiagonalGreen:
    @pytest.mark.parametrize("method", ["spectral", "jost", "dense_inverse"])
    @pytest.mark.parametrize("kappa", [0.7, 2.0, 5.0])
    def test_free(self, method, kappa):
        g = Grid(256, 20.0)
        gd = diagonal_green(problem(g, np.zeros(g.num_points), kappa), method)
        assert np.max(np.abs(gd.values.values - 1 / (2 * kappa))) <= 1e-10

    @pytest.mark.parametrize("method", ["spectral", "jost"])
    def test_constant_shift(self, method):
        g = Grid(256, 20.0)
        gd = diagonal_green(problem(g, np.ones(g.num_points), 2.0), method)
        assert np.max(np.abs(gd.values.values - O.CONST_SHIFT_G)) <= 1e-8

    @pytest.mark.parametrize("method, kw", [("dense_inverse", {}), ("series", {"order": 14})])
    def test_constant_shift_converges_under_refinement(self, method, kw):
        # the engines built on the discrete free resolvent miss the xi^-4 tail beyond the grid cutoff
        errs = []
        for n in (256, 512, 1024):
            g = Grid(n, 20.0)
            gd = diagonal_green(problem(g, np.ones(n), 2.0), method, **kw)
            errs.append(np.max(np.abs(gd.values.values - O.CONST_SHIFT_G)))
        assert errs[-1] <= 1e-10
        assert errs[0] / errs[1] >= 16

    @pytest.mark.parametrize("method", ["spectral", "jost"])
    def test_step_plus_gaussian_against_dense(self, method):
        g = Grid(1024, 40.0)
        V = periodize(StepProfile(0.5), g, 20.0).samples() + np.exp(-g.x**2)
        prob = problem(g, V, 3.0)
        dense = diagonal_green(prob, "dense_inverse").values.values
        assert np.max(np.abs(diagonal_green(prob, method).values.values - dense)) <= 1e-8

    def test_positive(self, grid, rng):
        V = band_limited(grid, rng).values
        gd = diagonal_green(problem(grid, V, 2.0 + np.sqrt(max(0, -V.min()))), "spectral")
        assert np.all(gd.values.values > 0)

    def test_series_monotone_in_order(self, grid):
        prob = problem(grid, 0.5 * np.exp(-grid.x**2), 3.0)
        dense = diagonal_green(prob, "dense_inverse").values.values
        errs = [np.max(np.abs(diagonal_green(prob, "series", order=n).values.values - dense)) for n in (2, 3, 4, 6)]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_series_parameter_small_for_weak_potential(self, grid):
        assert series_parameter(problem(grid, 0.5 * np.exp(-grid.x**2), 3.0)) < 1

    def test_series_rejects_strong_potential(self, grid):
        with pytest.raises(ConvergenceError):
            diagonal_green(problem(grid, 20 * np.exp(-grid.x**2), 1.0), "series")

    def test_positivity_precondition(self, grid):
        with pytest.raises(SpectralConditionError):
            diagonal_green(problem(grid, -2 * np.exp(-grid.x**2), 1.0), "spectral")

    def test_unknown_method(self, grid):
        with pytest.raises(ParameterError):
            diagonal_green(problem(grid, np.zeros(grid.num_points), 1.0), "magic")

    @pytest.mark.parametrize("kappa", [0.0, -1.0])
    def test_kappa_positive(self, grid, kappa):
        with pytest.raises(ParameterError):
            problem(grid, np.zeros(grid.num_points), kappa)


class TestJost:
    def test_wronskian_constant_and_solutions_positive(self):
        g = Grid(1024, 20.0)
        jp = jost_pair(problem(g, np.exp(-g.x**2), 3.0))
        w = jp.wronskian
        assert np.ptp(w) <= 1e-8 * np.mean(np.abs(w))
        assert np.all(jp.psi_plus.values > 0) and np.all(jp.psi_minus.values > 0)

    def test_free_wronskian(self):
        g = Grid(128, 10.0)
        jp = jost_pair(problem(g, np.zeros(g.num_points), 1.5))
        # psi_- = e^{kappa (x + L)}, psi_+ = e^{-kappa (x - L)}: W = -2 kappa e^{2 kappa L}
        np.testing.assert_allclose(jp.wronskian, -3.0 * np.exp(30.0), rtol=1e-12)


class TestOdeResidual:
    def test_free(self):
        g = Grid(256, 20.0)
        prob = problem(g, np.zeros(g.num_points), 2.0)
        assert greens_ode_residual(diagonal_green(prob, "jost"), prob.potential) <= 1e-12

    def test_gaussian_jost(self):
        g = Grid(1024, 20.0)
        prob = problem(g, np.exp(-g.x**2), 3.0)
        assert greens_ode_residual(diagonal_green(prob, "jost"), prob.potential) <= 1e-6

    def test_refinement_order(self):
        res = []
        for n in (256, 512, 1024):
            g = Grid(n, 20.0)
            prob = problem(g, np.exp(-g.x**2), 3.0)
            res.append(greens_ode_residual(diagonal_green(prob, "jost"), prob.potential))
        assert res[0] / res[1] >= 8 and res[1] / res[2] >= 8

    def test_grid_mismatch(self):
        a, b = Grid(64, 5.0), Grid(128, 5.0)
        gd = diagonal_green(problem(a, np.zeros(64), 1.0), "spectral")
        with pytest.raises(ParameterError):
            greens_ode_residual(gd, b.zeros())


class TestTranslation:
    def test_zero_shift(self, gaussian):
        assert translation_covariance_check(gaussian, 2.0, 0.0) == 0.0

    def test_one_cell(self, grid, gaussian):
        assert translation_covariance_check(gaussian, 2.0, grid.dx) <= 1e-10

    def test_random_field_17_cells(self, grid, rng):
        q = band_limited(grid, rng)
        kappa = 1.0 + np.sqrt(max(0.0, -q.values.min()))
        assert translation_covariance_check(q, kappa, 17 * grid.dx) <= 1e-10

    def test_jost_engine(self, grid, gaussian):
        assert translation_covariance_check(gaussian, 2.0, 5 * grid.dx, method="jost") <= 1e-10

    def test_misaligned(self, grid, gaussian):
        with pytest.raises(ParameterError):
            translation_covariance_check(gaussian, 2.0, 0.3 * grid.dx)


class TestHilbertSchmidt:
    def test_zero(self, grid):
        assert hilbert_schmidt_check(grid.zeros(), 2.0) == (0.0, 0.0)

    @pytest.mark.parametrize("kappa", [1, 2, 4])
    def test_gaussian(self, gaussian, kappa):
        lhs, rhs = hilbert_schmidt_check(gaussian, float(kappa))
        assert rhs == pytest.approx(getattr(O, f"HS_GAUSS_K{kappa}"), rel=1e-10)
        assert abs(lhs - rhs) / rhs <= 1e-6

    def test_single_mode(self, grid):
        xi0 = np.pi / grid.half_length * 8
        q = Field(grid, np.cos(xi0 * grid.x))
        lhs, rhs = hilbert_schmidt_check(q, 1.0)
        l2sq = grid.half_length  # int_{-L}^{L} cos^2
        assert rhs == pytest.approx(l2sq / (xi0**2 + 4), rel=1e-12)
        assert abs(lhs - rhs) <= 1e-8 * rhs


class TestOperatorIdentities:
    def test_linear_zero(self, grid):
        assert verify_linear_identity(grid.zeros(), 2.0) == 0.0

    def test_linear_symbol_at_origin(self):
        g = Grid(64, 10.0)
        f = Field(g, np.ones(64))
        from tidal_kdv.schrodinger import linear_kernel_term

        assert 16 * 3.0**5 * linear_kernel_term(f.values, g, 3.0)[0] == pytest.approx(O.LINEAR_SYMBOL_AT_0_K3)

    def test_linear_gaussian(self, gaussian):
        assert verify_linear_identity(gaussian, 2.0) <= 1e-11

    def test_linear_requires_kappa_one(self, gaussian):
        with pytest.raises(ParameterError):
            verify_linear_identity(gaussian, 0.5)

    def test_quadratic_zero(self, grid):
        assert verify_quadratic_identity(grid.zeros(), grid.zeros(), 2.0) == 0.0

    def test_quadratic_single_mode(self):
        g = Grid(64, 2 * np.pi)
        f = Field(g, np.cos(3 * g.x))
        assert verify_quadratic_identity(f, f, 2.0) <= 1e-10

    def test_quadratic_gaussians(self):
        g = Grid(1024, 20.0)
        f = Field(g, np.exp(-g.x**2))
        h = Field(g, g.x * np.exp(-g.x**2))
        assert verify_quadratic_identity(f, h, 3.0) <= 1e-8

    def test_quadratic_aliasing_detected(self, grid, rng):
        from tidal_kdv import ResolutionError

        f = Field(grid, rng.normal(size=grid.num_points))
        with pytest.raises(ResolutionError):
            verify_quadratic_identity(f, f, 2.0)

    @given(st.floats(-30, 30), st.floats(-30, 30), st.floats(1, 8))
    @settings(max_examples=50, deadline=None)
    def test_symbol_symmetry(self, xi, eta, kappa):
        # swapping the roles of f and h maps (xi, eta) to (xi, xi - eta)
        assert quadratic_symbol(xi, eta, kappa) == pytest.approx(quadratic_symbol(xi, xi - eta, kappa), rel=1e-13)

    def test_convolution_is_bilinear(self):
        g = Grid(64, 2 * np.pi)
        f = Field(g, np.cos(g.x))
        h = Field(g, np.sin(2 * g.x))
        a = quadratic_by_convolution(f + h, f, 2.0)
        b = quadratic_by_convolution(f, f, 2.0) + quadratic_by_convolution(h, f, 2.0)
        np.testing.assert_allclose(a, b, atol=1e-13)


class TestAlpha:
    def test_zero(self, grid):
        assert compute_alpha(grid.zeros(), 2.0) == 0.0
        assert compute_hkappa_functional(grid.zeros(), 2.0) == 0.0

    @pytest.mark.parametrize("kappa", [2, 4, 8])
    @pytest.mark.parametrize("method, tol", [("spectral", 1e-10), ("jost", 1e-7)])
    def test_against_shooting_oracle(self, kappa, method, tol):
        g = Grid(1024, 20.0)
        q = Field(g, np.exp(-g.x**2))
        assert compute_alpha(q, float(kappa), method) == pytest.approx(getattr(O, f"ALPHA_GAUSS_K{kappa}"), rel=tol)

    def test_nonnegative(self, grid, rng):
        q = band_limited(grid, rng)
        kappa = 1.0 + np.sqrt(max(0.0, -q.values.min()))
        assert compute_alpha(q, kappa) >= 0

    def test_expansion_next_coefficient(self):
        g = Grid(1024, 20.0)
        q = Field(g, np.exp(-g.x**2))
        P, H = momentum(q), kdv_hamiltonian(q)
        assert P == pytest.approx(O.GAUSS_P, rel=1e-12)
        assert H == pytest.approx(O.GAUSS_HKDV, rel=1e-12)
        for kappa in (8.0, 16.0, 32.0):
            lhs = kappa**4 * abs(compute_alpha(q, kappa) - P / (4 * kappa**3))
            assert lhs / (H / (16 * kappa)) == pytest.approx(1.0, abs=0.05)

    def test_hkappa_tends_to_hkdv(self):
        g = Grid(1024, 20.0)
        q = Field(g, np.exp(-g.x**2))
        assert compute_hkappa_functional(q, 32.0) == pytest.approx(O.GAUSS_HKDV, rel=0.02)

    def test_second_variation(self, grid, gaussian):
        kappa, lam = 2.0, 1e-3
        d2 = (compute_alpha(lam * gaussian, kappa) + compute_alpha(-lam * gaussian, kappa)) / lam**2
        assert d2 == pytest.approx(hs_kappa_norm(gaussian, -1, kappa) ** 2 / kappa, rel=0.01)

    def test_bound_state_detected(self, grid):
        with pytest.raises(SpectralConditionError):
            compute_alpha(Field(grid, -3 * np.exp(-grid.x**2)), 1.0, "jost")


class TestTailRemainder:
    def test_zero(self, grid):
        assert greens_tail_remainder(grid.zeros(), grid.zeros(), 4.0) == 0.0

    def test_decreasing_and_slope(self):
        g = Grid(1024, 20.0)
        q = Field(g, np.exp(-g.x**2))
        kappas = np.array([8.0, 16.0, 32.0, 64.0])
        r = np.array([greens_tail_remainder(q, g.zeros(), k) for k in kappas])
        assert r[1] < r[0]
        assert np.polyfit(np.log(kappas), np.log(r), 1)[0] <= -0.9

    def test_integer_s(self, gaussian, grid):
        with pytest.raises(ParameterError):
            greens_tail_remainder(gaussian, grid.zeros(), 4.0, s=0)


def test_green_of_matches_problem(gaussian):
    a = green_of(gaussian, 2.0).values.values
    b = diagonal_green(SchrodingerProblem(gaussian, 2.0)).values.values
    np.testing.assert_array_equal(a, b)
