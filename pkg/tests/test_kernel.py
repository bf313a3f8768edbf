import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracmass.grid import Field, integral, lp_norm, make_grid
from fracmass.kernel import (
    UnderResolvedWarning,
    apply_semigroup,
    cauchy_density,
    direct_constant,
    fractional_laplacian_direct,
    fractional_laplacian_spectral,
    kernel_field,
    make_kernel,
    spectral_derivative,
    trig_eval,
    wrapped_cauchy_density,
)
from fracmass.problem import gaussian_bumps


def gamma_constant(alpha, d):
    """Closed form alpha 2^(alpha-1) Gamma((d+alpha)/2) / (pi^(d/2) Gamma(1-alpha/2))."""
    return alpha * 2 ** (alpha - 1) * math.gamma((d + alpha) / 2) / (math.pi ** (d / 2) * math.gamma(1 - alpha / 2))


class TestMultiplier:
    def test_alpha_one_tau_two_mode_three(self):
        g = make_grid(1, 64, math.pi)
        m = make_kernel(1.0, 2.0, g).multiplier
        assert m[np.argmin(np.abs(g.wavenumbers - 3.0))] == pytest.approx(math.exp(-6.0), rel=1e-14)
        assert math.exp(-6.0) == pytest.approx(0.00247875, rel=1e-6)

    def test_alpha_three_halves_mode_two(self):
        g = make_grid(1, 64, math.pi)
        m = make_kernel(1.5, 1.0, g).multiplier
        got = m[np.argmin(np.abs(g.wavenumbers - 2.0))]
        assert got == pytest.approx(math.exp(-(2.0**1.5)), rel=1e-14)
        # 0.0590977 is off in the fifth digit; exact is 0.05910575
        assert got == pytest.approx(0.0590977, rel=2e-4)

    def test_tau_zero_is_identity(self, grid1d, unit_bump):
        h = make_kernel(1.2, 0.0, grid1d)
        assert np.all(h.multiplier == 1.0)
        assert apply_semigroup(h, unit_bump) is unit_bump
        with pytest.raises(ValueError):
            kernel_field(h)

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0, 2.5])
    def test_alpha_outside_open_interval_rejected(self, grid1d, alpha):
        with pytest.raises(ValueError):
            make_kernel(alpha, 1.0, grid1d)

    def test_negative_tau_rejected(self, grid1d):
        with pytest.raises(ValueError):
            make_kernel(1.0, -0.1, grid1d)


class TestRealKernel:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 1.9])
    def test_unit_mass(self, grid1d, alpha):
        assert integral(make_kernel(alpha, 1.0, grid1d).real_kernel) == pytest.approx(1.0, abs=1e-12)

    def test_unit_mass_2d(self, grid2d):
        assert integral(make_kernel(1.3, 0.7, grid2d).real_kernel) == pytest.approx(1.0, abs=1e-12)

    def test_peak_at_origin(self, grid1d):
        p = make_kernel(1.5, 1.0, grid1d).real_kernel.values
        assert np.argmax(p) == grid1d.n // 2

    @pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
    def test_periodized_cauchy_exact(self, tau):
        g = make_grid(1, 4096, 40.0)
        p = make_kernel(1.0, tau, g).real_kernel.values
        np.testing.assert_allclose(p, wrapped_cauchy_density(tau, g.axis, g.L), atol=1e-12)

    def test_wrapped_cauchy_tends_to_free(self):
        x = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(wrapped_cauchy_density(1.0, x, 1e4), cauchy_density(1.0, x), rtol=1e-6)

    def test_gaussian_limit_near_two(self, grid1d):
        # alpha -> 2 tends to the heat kernel exp(-x^2/(4 tau)) / sqrt(4 pi tau)
        p = make_kernel(1.999, 1.0, grid1d).real_kernel.values
        heat = np.exp(-grid1d.axis**2 / 4.0) / math.sqrt(4 * math.pi)
        assert np.max(np.abs(p - heat)) < 5e-3

    def test_under_resolved_warns(self):
        g = make_grid(1, 64, 40.0)
        with pytest.warns(UnderResolvedWarning):
            kernel_field(make_kernel(1.9, 0.1, g))

    def test_self_similarity(self):
        # p(tau, x) = tau^(-1/alpha) p(1, x tau^(-1/alpha)); compare peak heights
        g = make_grid(1, 8192, 400.0)
        a = 1.5
        p1 = make_kernel(a, 1.0, g).real_kernel.values.max()
        p8 = make_kernel(a, 8.0, g).real_kernel.values.max()
        assert p8 / p1 == pytest.approx(8.0 ** (-1 / a), rel=1e-5)


class TestSpectralOperators:
    def test_cos_is_eigenfunction(self):
        g = make_grid(1, 64, math.pi)
        f = Field.from_function(g, np.cos)
        for a in (0.5, 1.0, 1.7):
            out = fractional_laplacian_spectral(a, f)
            np.testing.assert_allclose(out.values, -f.values, atol=1e-13)

    def test_cos_mode_two(self):
        g = make_grid(1, 64, math.pi)
        f = Field.from_function(g, lambda x: np.cos(2 * x))
        out = fractional_laplacian_spectral(1.5, f)
        np.testing.assert_allclose(out.values, -(2**1.5) * f.values, atol=1e-12)

    def test_derivative(self):
        g = make_grid(1, 64, math.pi)
        f = Field.from_function(g, np.sin)
        np.testing.assert_allclose(spectral_derivative(f).values, np.cos(g.axis), atol=1e-13)
        np.testing.assert_allclose(spectral_derivative(f, 2).values, -np.sin(g.axis), atol=1e-12)

    def test_trig_eval_off_grid(self):
        g = make_grid(1, 32, math.pi)
        f = Field.from_function(g, lambda x: np.cos(3 * x) + 0.5 * np.sin(x))
        pts = np.array([[0.123], [1.7], [-2.9]])
        vals = trig_eval(f, pts)
        np.testing.assert_allclose(vals, np.cos(3 * pts[:, 0]) + 0.5 * np.sin(pts[:, 0]), atol=1e-13)


class TestDirectForm:
    @pytest.mark.parametrize("alpha", [0.05, 0.3, 0.8, 1.0, 1.5, 1.9, 1.9999])
    @pytest.mark.parametrize("d", [1, 2])
    def test_constant_matches_gamma_form(self, alpha, d):
        assert direct_constant(alpha, d) == pytest.approx(gamma_constant(alpha, d), rel=1e-10)

    @pytest.mark.parametrize("alpha", [0.8, 1.5, 1.9999])
    def test_cos_at_origin(self, alpha):
        g = make_grid(1, 64, math.pi)
        f = Field.from_function(g, np.cos)
        val = fractional_laplacian_direct(alpha, f, [0.0], r=0.1, R=200.0)
        assert abs(val.value - (-1.0)) <= 0.05 + val.tail_bound

    def test_agrees_with_spectral_2d(self):
        g = make_grid(2, 32, math.pi)
        f = Field.from_function(g, lambda x, y: np.cos(x) * np.cos(y))
        val = fractional_laplacian_direct(1.2, f, [0.3, -0.4], r=0.1, R=30.0)
        ref = -(2 ** 0.6) * math.cos(0.3) * math.cos(-0.4)
        assert abs(val.value - ref) <= 1e-2 + val.tail_bound

    def test_radii_validated(self):
        g = make_grid(1, 64, math.pi)
        f = Field.from_function(g, np.cos)
        with pytest.raises(ValueError):
            fractional_laplacian_direct(1.0, f, [0.0], r=2.0, R=1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 1.9), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_semigroup_property(alpha, t1, t2):
    g = make_grid(1, 256, 20.0)
    f = gaussian_bumps(g, [(1.0, 0.0, 1.0), (0.5, 3.0, 0.7)])
    two = apply_semigroup(make_kernel(alpha, t2, g), apply_semigroup(make_kernel(alpha, t1, g), f))
    one = apply_semigroup(make_kernel(alpha, t1 + t2, g), f)
    assert lp_norm(two - one, np.inf) < 1e-12
    assert integral(one) == pytest.approx(integral(f), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 1.9), st.floats(0.1, 5.0))
def test_positivity_preserving(alpha, tau):
    g = make_grid(1, 1024, 40.0)
    f = gaussian_bumps(g, [(1.0, 0.0, 1.0)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderResolvedWarning)
        out = apply_semigroup(make_kernel(alpha, tau, g), f)
    assert out.min() > -1e-10
