import math

import numpy as np
import pytest

from fracmass.grid import make_grid
from fracmass.kernel_checks import (
    check_cauchy,
    check_generator,
    check_minimum_sign,
    eventually_decreasing,
    fit_loglog_slope,
    verify_kernel_bounds,
    verify_limit_g,
)
from fracmass.problem import gaussian_bumps
from fracmass.report import FAIL, INCONCLUSIVE, PASS, Check, TheoremReport


class TestReport:
    def test_verdict_bookkeeping(self):
        rep = TheoremReport()
        rep.add_bound("a", "x >= 0", 0.5)
        rep.add_bound("b", "y >= 0", -1e-9, tol=1e-8)
        rep.inconclusive("c", "z", "too coarse")
        assert rep.ok and not rep.all_passed
        rep.add_bound("d", "w >= 0", -1.0)
        assert not rep.ok and [c.name for c in rep.failed] == ["d"]
        assert rep.to_dict()["counts"] == {PASS: 2, FAIL: 1, INCONCLUSIVE: 1}
        assert rep["c"].reason == "too coarse"
        with pytest.raises(KeyError):
            rep["missing"]

    def test_nan_margin_needs_reason(self):
        with pytest.raises(ValueError):
            Check("x", "claim", PASS, math.nan)
        with pytest.raises(ValueError):
            Check("x", "claim", "maybe", 0.0)

    def test_summary_lines(self):
        rep = TheoremReport()
        rep.add_bound("a", "x >= 0", 0.25)
        assert rep.summary_lines() == ["[        PASS] a: margin=2.500e-01"]


class TestHelpers:
    def test_slope(self):
        x = np.geomspace(1, 100, 7)
        slope, icpt = fit_loglog_slope(x, 3 * x**-0.75)
        assert slope == pytest.approx(-0.75) and icpt == pytest.approx(math.log(3))

    @pytest.mark.parametrize("seq,expected", [([5, 4, 3, 2], True), ([1, 3, 2, 1], True), ([3, 2, 2.5], False)])
    def test_eventually_decreasing(self, seq, expected):
        assert eventually_decreasing(seq)[0] is expected


class TestKernelChecks:
    def test_bounds_pass_on_large_box(self):
        g = make_grid(1, 2048, 80.0)
        rep = verify_kernel_bounds(1.5, g, np.geomspace(0.5, 8.0, 9), [1.0, 2.0, np.inf], relative=True)
        assert rep.ok and not rep.inconclusive_checks, rep.summary_lines()

    def test_periodization_flagged_on_small_box(self):
        g = make_grid(1, 512, 4.0)
        rep = verify_kernel_bounds(0.8, g, np.geomspace(0.5, 8.0, 9), [2.0], relative=True)
        assert rep.inconclusive_checks

    def test_bounds_input_validation(self):
        g = make_grid(1, 256, 20.0)
        with pytest.raises(ValueError):
            verify_kernel_bounds(1.5, g, [1.0, 2.0], [2.0])
        with pytest.raises(ValueError):
            verify_kernel_bounds(1.5, g, [0.5, 8.0], [0.5])

    def test_free_cauchy_differs_from_torus_kernel(self):
        g = make_grid(1, 4096, 40.0)
        free = check_cauchy([2.0], g)
        wrapped = check_cauchy([2.0], g, wrapped=True)
        assert wrapped.all_passed
        assert free.checks[0].context["max_error"] > 1e-4

    def test_limit_g(self):
        g = make_grid(1, 2048, 80.0)
        f = gaussian_bumps(g, [(1.0, 0.0, 1.0), (0.5, 3.0, 0.5)])
        assert verify_limit_g(1.5, f, [0.5, 2, 8, 32, 64]).all_passed
        with pytest.raises(ValueError):
            verify_limit_g(1.5, f, [2, 1])

    def test_limit_g_inconclusive_on_wrap(self):
        g = make_grid(1, 256, 10.0)
        f = gaussian_bumps(g, [(1.0, 0.0, 1.0)])
        assert verify_limit_g(1.5, f, [1, 10, 100]).inconclusive_checks

    def test_generator_and_min_sign(self):
        g = make_grid(1, 1024, 40.0)
        f = gaussian_bumps(g, [(1.0, -2.0, 1.0), (-1.0, 2.0, 1.5)])
        assert check_generator(1.3, f, 1.0).all_passed
        assert check_minimum_sign(1.3, f).all_passed
