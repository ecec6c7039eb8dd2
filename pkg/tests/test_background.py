import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle_values as O
from tidal_kdv import ConfigurationError, Grid, ParameterError, StepProfile, eval_profile, periodize
from tidal_kdv.background import default_return_center, tanh_derivative


class TestStepProfile:
    @pytest.mark.parametrize("j", [0, 1, 2, 3])
    def test_derivatives_at_origin(self, j):
        assert eval_profile(StepProfile(1.0), 0.0, j) == pytest.approx(getattr(O, f"TANH_D{j}_AT_0"), abs=1e-15)

    def test_limits(self):
        p = StepProfile(0.5, 0.25)
        assert p.left == -0.25 and p.right == 0.75
        assert p(40.0) == pytest.approx(0.75)
        assert p(-40.0) == pytest.approx(-0.25)

    def test_matches_finite_differences(self):
        x = np.linspace(-3, 3, 13)
        h = 1e-4
        for j in range(1, 7):
            fd = (tanh_derivative(x + h, j - 1) - tanh_derivative(x - h, j - 1)) / (2 * h)
            np.testing.assert_allclose(tanh_derivative(x, j), fd, rtol=1e-6, atol=1e-6)

    def test_order_limit(self):
        with pytest.raises(ParameterError):
            tanh_derivative(0.0, 7)

    @given(st.integers(1, 6), st.floats(5, 30), st.floats(-2, 2))
    @settings(max_examples=60, deadline=None)
    def test_derivative_decay(self, j, x, c1):
        p = StepProfile(c1)
        for sign in (1, -1):
            assert abs(eval_profile(p, sign * x, j)) <= 4**j * abs(c1) * np.exp(-2 * x) + 1e-300

    def test_momentum_flux(self):
        assert StepProfile(0.5).momentum_flux() == pytest.approx(0.5)
        assert StepProfile(0.5, 0.25).momentum_flux() == pytest.approx(0.875)


class TestPeriodize:
    def test_value_at_origin(self):
        g = Grid(2048, 50 * np.pi)
        bg = periodize(StepProfile(1.0), g, 60.0)
        assert abs(bg(0.0)) <= 1e-10

    def test_edges_agree(self):
        g = Grid(1024, 60.0)
        bg = periodize(StepProfile(0.7, 0.1), g, 40.0)
        assert bg(-g.half_length) == pytest.approx(bg(g.half_length), abs=1e-10)

    def test_degenerate_step(self):
        g = Grid(256, 40.0)
        bg = periodize(StepProfile(0.0, 0.3), g, 20.0)
        assert np.all(bg.samples() == 0.3)

    def test_matches_profile_in_trusted_window(self):
        g = Grid(2048, 60.0)
        p = StepProfile(0.5, 0.2)
        bg = periodize(p, g, 40.0)
        inside = np.abs(g.x) <= bg.trusted_half_width
        assert np.max(np.abs(bg.samples()[inside] - p(g.x[inside]))) <= 1e-8

    @pytest.mark.parametrize("L, x_R", [(40.0, 19.0), (39.0, 20.0), (50.0, 35.0)])
    def test_rejects_bad_return_center(self, L, x_R):
        with pytest.raises(ConfigurationError):
            periodize(StepProfile(1.0), Grid(256, L), x_R)

    def test_linear_in_parameters(self):
        g = Grid(512, 45.0)
        a = periodize(StepProfile(0.3, 0.1), g, 25.0).samples()
        b = periodize(StepProfile(0.5, -0.2), g, 25.0).samples()
        c = periodize(StepProfile(0.8, -0.1), g, 25.0).samples()
        np.testing.assert_allclose(a + b, c, atol=1e-14)

    def test_derivative_spectrum_matches_transform(self):
        # W_per' = sech^2(x) - sech^2(x - x_R); int sech^2(x) e^{-i xi x} dx = pi xi / sinh(pi xi / 2)
        g = Grid(1024, 40.0)
        x_R = 20.0
        bg = periodize(StepProfile(1.0), g, x_R)
        coeff = np.fft.rfft(bg.samples(1)) / g.num_points * np.exp(-1j * g.k * g.half_length)
        k = g.k[1:]
        exact = np.pi * k / np.sinh(np.pi * k / 2) * (1 - np.exp(-1j * k * x_R)) / (2 * g.half_length)
        np.testing.assert_allclose(coeff[1:], exact, rtol=0, atol=1e-15)
        assert np.max(np.abs(coeff[g.k > 24])) <= 1e-12

    def test_default_return_center(self):
        g = Grid(512, 70.0)
        assert default_return_center(g) == 50.0
        periodize(StepProfile(1.0), g, default_return_center(g))
