import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracmass.grid import Field, make_grid
from fracmass.problem import CoefficientFn, Nonlinearity, ProblemSpec, gaussian_bumps
from fracmass.solver import SolverConfig, solve
from fracmass.theorems import (
    comparison_check,
    decay_diagnostic,
    epsilon_persistence_check,
    lower_bound,
    m_infinity_estimate,
    mass_bound_check,
    ode_y,
    oracle_riccati,
    persistence_check,
    positivity_check,
    power_condition_integral,
)


def make_spec(alpha=1.5, k=None, h=None, phi=None, bumps=((1.0, 0.0, 1.0),), n=512, L=30.0):
    g = make_grid(1, n, L)
    return ProblemSpec(alpha, g, k or CoefficientFn.constant(1.0), h or CoefficientFn.constant(1.0),
                       phi or Nonlinearity.square(), gaussian_bumps(g, list(bumps)))


@pytest.fixture(scope="module")
def persistent_run():
    spec = make_spec(h=CoefficientFn.decaying(1.0))
    return spec, solve(spec, SolverConfig(t_max=8.0, n_steps=64))


class TestLowerBound:
    @pytest.mark.parametrize("h", [CoefficientFn.constant(1.0), CoefficientFn.power(1.5, a=0.3),
                                   CoefficientFn.decaying(2.0), CoefficientFn.table([0, 1, 3], [1.0, 0.2, 0.7])],
                             ids=lambda h: h.kind)
    def test_closed_form_matches_ode(self, h):
        spec = make_spec(h=h)
        t = np.linspace(0, 4, 17)
        np.testing.assert_allclose(lower_bound(spec, t), ode_y(spec, t), rtol=1e-12)

    def test_no_reaction_is_flat(self):
        spec = make_spec(h=CoefficientFn.constant(0.0))
        np.testing.assert_allclose(lower_bound(spec, [0, 1, 5]), spec.u0.values.sum() * spec.grid.dx, rtol=1e-14)

    def test_rate_uses_sup(self):
        # phi = x^2, S = 2: rate 2; h = 1, t = 1
        spec = make_spec(bumps=((2.0, 0.0, 1.0),))
        m0 = 2.0 * math.sqrt(2 * math.pi)
        assert lower_bound(spec, 1.0) == pytest.approx(m0 * math.exp(-2.0), rel=1e-12)


class TestRiccati:
    def test_values(self):
        assert oracle_riccati(1.0, CoefficientFn.constant(1.0), 2.0)(1.0) == pytest.approx(0.5)
        assert oracle_riccati(0.0, CoefficientFn.constant(1.0), 2.0)(3.0) == 0.0
        assert oracle_riccati(1.0, CoefficientFn.decaying(1.0), 2.0)(60.0) == pytest.approx(0.5, rel=1e-12)
        assert oracle_riccati(1.0, CoefficientFn.constant(1.0), 3.0)(1.0) == pytest.approx(3 ** -0.5)

    def test_solves_the_ode(self):
        h = CoefficientFn.power(1.0)
        u = oracle_riccati(0.8, h, 2.5)
        t, dt = 1.3, 1e-6
        deriv = (u(t + dt) - u(t - dt)) / (2 * dt)
        assert deriv == pytest.approx(-h(t) * u(t) ** 2.5, rel=1e-7)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            oracle_riccati(1.0, CoefficientFn.constant(1.0), 1.0)


class TestMInfinity:
    def test_exact_for_geometric_decay(self):
        t = np.linspace(0, 10, 201)
        est = m_infinity_estimate(t, 1.0 + np.exp(-t))
        assert est.fitted and est.value == pytest.approx(1.0, abs=1e-12)
        assert est.ratio == pytest.approx(math.exp(-0.5))

    def test_constant_series(self):
        est = m_infinity_estimate([0, 1, 2], [3.0, 3.0, 3.0])
        assert est.value == 3.0 and est.uncertainty == 0.0

    def test_non_geometric_falls_back(self):
        t = np.linspace(0, 10, 101)
        est = m_infinity_estimate(t, 5.0 - t)
        assert not est.fitted and est.value == -5.0


class TestRunChecks:
    def test_mass_checks_pass(self, persistent_run):
        spec, traj = persistent_run
        rep = mass_bound_check(traj, spec)
        assert rep.all_passed, rep.summary_lines()

    def test_positivity_checks_pass(self, persistent_run):
        _, traj = persistent_run
        assert positivity_check(traj).all_passed

    def test_persistence_passes(self, persistent_run):
        spec, traj = persistent_run
        rep = persistence_check(traj, spec)
        assert rep.all_passed, rep.summary_lines()
        assert rep["persistence"].context["M_inf"] > rep["persistence"].context["bound"]

    def test_persistence_inconclusive_without_integrable_h(self):
        spec = make_spec(n=256)
        traj = solve(spec, SolverConfig(t_max=1.0, n_steps=8))
        assert persistence_check(traj, spec)["persistence"].verdict == "inconclusive"

    def test_persistence_inconclusive_for_short_horizon(self):
        spec = make_spec(h=CoefficientFn.decaying(1.0), n=256)
        traj = solve(spec, SolverConfig(t_max=1.0, n_steps=8))
        assert persistence_check(traj, spec)["persistence"].verdict == "inconclusive"

    def test_signed_data_inconclusive(self):
        spec = make_spec(bumps=((1.0, 0.0, 1.0), (-0.5, 5.0, 1.0)), n=256)
        traj = solve(spec, SolverConfig(t_max=0.5, n_steps=4))
        assert positivity_check(traj)["positivity"].verdict == "inconclusive"
        assert mass_bound_check(traj, spec)["mass_lower_bound"].verdict == "inconclusive"


class TestDecay:
    def test_requires_finite_total_by_default(self, persistent_run):
        spec, traj = persistent_run
        with pytest.raises(ValueError):
            decay_diagnostic(traj, spec, 1.0)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_decays_with_unbounded_K(self, persistent_run, p):
        spec, traj = persistent_run
        diag = decay_diagnostic(traj, spec, p, require_hypothesis=False)
        assert diag.report[f"decay_p={p:g}"].context["final"] < 0.1 * diag.report[f"decay_p={p:g}"].context["peak"]
        assert diag.report[f"interpolation_p={p:g}"].passed

    def test_p_below_one(self, persistent_run):
        spec, traj = persistent_run
        with pytest.raises(ValueError):
            decay_diagnostic(traj, spec, 0.5, require_hypothesis=False)


class TestComparison:
    def test_equal_data_zero_margin(self):
        spec = make_spec(n=256)
        rep = comparison_check(spec, spec, SolverConfig(t_max=0.5, n_steps=4))
        assert rep["comparison"].passed and rep["comparison"].margin == 0.0

    def test_ordered_data(self):
        spec = make_spec(n=256)
        big = spec.with_initial(spec.u0 * 1.5 + gaussian_bumps(spec.grid, [(0.3, 4.0, 1.0)]))
        rep = comparison_check(spec, big, SolverConfig(t_max=1.0, n_steps=8))
        assert rep["comparison"].passed and rep["comparison"].context["min_after_start"] > 0

    def test_misordered_rejected(self):
        spec = make_spec(n=256)
        with pytest.raises(ValueError):
            comparison_check(spec, spec.scaled(0.5), SolverConfig(t_max=0.5, n_steps=4))

    def test_mismatched_rejected(self):
        a = make_spec(n=256)
        b = make_spec(n=256, phi=Nonlinearity.cosh())
        with pytest.raises(ValueError):
            comparison_check(a, b, SolverConfig(t_max=0.5, n_steps=4))


class TestPowerCondition:
    def test_against_mpmath(self):
        mpmath.mp.dps = 30
        ref = float(mpmath.quad(lambda s: (mpmath.e**s - 1) ** (-mpmath.mpf(2) / 3), [1, mpmath.inf]))
        finite, val = power_condition_integral(CoefficientFn.constant(1.0), CoefficientFn.exponential(1.0), 1.5, 1, 2.0)
        assert finite and val == pytest.approx(ref, rel=1e-10)
        assert val == pytest.approx(0.86487437309967, rel=1e-12)

    def test_algebraic_tail(self):
        # K = s, exponent 2: int_1^inf s^-2 ds = 1
        finite, val = power_condition_integral(CoefficientFn.constant(1.0), CoefficientFn.constant(1.0), 0.5, 1, 2.0)
        assert finite and val == pytest.approx(1.0, rel=1e-10)

    def test_divergent(self):
        assert power_condition_integral(CoefficientFn.constant(1.0), CoefficientFn.constant(1.0), 1.5, 1, 2.0) == (False, math.inf)

    def test_beta_checked(self):
        with pytest.raises(ValueError):
            power_condition_integral(CoefficientFn.constant(1.0), CoefficientFn.constant(1.0), 1.5, 1, 1.0)

    def test_epsilon_check_needs_power(self):
        spec = make_spec(phi=Nonlinearity.cosh(), n=256)
        with pytest.raises(ValueError):
            epsilon_persistence_check(spec, SolverConfig(t_max=1.0), [0.5])

    def test_epsilon_check_inconclusive_when_condition_fails(self):
        spec = make_spec(n=256)
        rep = epsilon_persistence_check(spec, SolverConfig(t_max=1.0), [0.5])
        assert rep["power_condition"].verdict == "fail"
        assert rep["eps_persistence"].verdict == "inconclusive"


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.0, 0.5), st.floats(-3.0, 3.0), st.floats(1.1, 1.9))
def test_comparison_property(scale, extra, center, alpha):
    spec = make_spec(alpha=alpha, bumps=((scale, 0.0, 1.0),), n=256)
    v0 = spec.u0 + gaussian_bumps(spec.grid, [(extra, center, 0.8)])
    rep = comparison_check(spec, spec.with_initial(v0), SolverConfig(t_max=0.5, n_steps=8))
    assert rep["comparison"].passed
