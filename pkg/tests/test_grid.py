import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracmass.grid import (
    Field,
    GridError,
    apply_multiplier,
    convolve,
    forward,
    integral,
    inverse,
    lp_norm,
    make_grid,
    spectral_energy,
)


class TestGrid:
    @pytest.mark.parametrize("d,n,L", [(3, 64, 1.0), (1, 100, 1.0), (1, 4, 1.0), (1, 64, 0.0), (1, 64, -2.0)])
    def test_rejects_bad_parameters(self, d, n, L):
        with pytest.raises(GridError):
            make_grid(d, n, L)

    def test_origin_at_center_index(self, grid1d):
        assert grid1d.axis[grid1d.center_index()[0]] == 0.0
        assert grid1d.axis[0] == -grid1d.L

    def test_wavenumbers_are_integer_multiples(self):
        g = make_grid(1, 16, math.pi)
        np.testing.assert_allclose(np.sort(np.abs(g.wavenumbers))[::2], np.arange(9)[:8])

    def test_2d_shapes(self, grid2d):
        assert grid2d.shape == (128, 128)
        assert grid2d.freq_norm.shape == (128, 128)
        assert grid2d.cell_volume == pytest.approx(grid2d.dx**2)


class TestIntegrals:
    def test_gaussian_integral(self, grid1d):
        f = Field.from_function(grid1d, lambda x: np.exp(-x * x))
        assert integral(f) == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_gaussian_integral_2d(self, grid2d):
        f = Field.from_function(grid2d, lambda x, y: np.exp(-x * x - y * y))
        assert integral(f) == pytest.approx(math.pi, rel=1e-13)

    @pytest.mark.parametrize("p", [1, 2, 3.5])
    def test_lp_norm_of_gaussian(self, grid1d, p):
        f = Field.from_function(grid1d, lambda x: np.exp(-x * x))
        # ||e^{-x^2}||_p = (pi/p)^{1/(2p)}
        assert lp_norm(f, p) == pytest.approx((math.pi / p) ** (1 / (2 * p)), rel=1e-12)

    def test_sup_norm(self, grid1d):
        f = Field.from_function(grid1d, lambda x: -3 * np.exp(-x * x))
        assert lp_norm(f, np.inf) == 3.0

    def test_p_below_one_rejected(self, grid1d):
        with pytest.raises(ValueError):
            lp_norm(Field.constant(grid1d, 1.0), 0.5)

    def test_parseval(self, grid1d, rng):
        f = Field(grid1d, rng.normal(size=grid1d.shape))
        assert spectral_energy(f) == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-12)


class TestFieldSafety:
    def test_non_finite_rejected(self, grid1d):
        vals = np.zeros(grid1d.shape)
        vals[3] = np.nan
        with pytest.raises(FloatingPointError):
            Field(grid1d, vals)

    def test_values_read_only(self, grid1d):
        f = Field.constant(grid1d, 1.0)
        with pytest.raises(ValueError):
            f.values[0] = 2.0

    def test_mixed_grids_rejected(self, grid1d):
        other = make_grid(1, 512, 40.0)
        with pytest.raises(GridError):
            Field.constant(grid1d, 1.0) + Field.constant(other, 1.0)

    def test_inverse_rejects_imaginary_residue(self, grid1d):
        spec = np.zeros(grid1d.shape, complex)
        spec[1] = 1.0  # unpaired mode: not the transform of a real field
        with pytest.raises(GridError):
            inverse(grid1d, spec)

    def test_convolve_rejects_growing_multiplier(self, grid1d):
        with pytest.raises(Exception):
            convolve(np.full(grid1d.shape, 2.0), Field.constant(grid1d, 1.0))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_roundtrip_and_identity_multiplier(coefs):
    g = make_grid(1, 64, 3.0)
    f = Field.from_function(g, lambda x: coefs[0] + coefs[1] * np.cos(math.pi * x / 3) + coefs[2] * np.sin(2 * math.pi * x / 3))
    back = inverse(g, forward(f))
    np.testing.assert_allclose(back.values, f.values, atol=1e-12)
    same = apply_multiplier(np.ones(g.shape), f)
    np.testing.assert_allclose(same.values, f.values, atol=1e-12)
