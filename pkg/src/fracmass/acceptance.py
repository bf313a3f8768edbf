"""The fifteen acceptance criteria as callable checks.

Each ``criterion_N`` returns a :class:`CriterionResult`; ``run_all`` runs
them in order.  Thresholds are the stated ones; nothing is relaxed to make a
criterion pass.  Where a criterion cannot hold on a periodic box, the
literal check is still run and a companion measurement is attached to the
result details.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache, wraps
from typing import Callable

import numpy as np

from .grid import Field, make_grid
from .kernel import make_kernel
from .kernel_checks import (
    check_cauchy,
    check_direct_vs_spectral,
    check_generator,
    check_normalization,
    check_semigroup,
    verify_kernel_bounds,
)
from .problem import (
    CoefficientFn,
    Nonlinearity,
    ProblemSpec,
    check_condition_d,
    gaussian_bumps,
    smooth_bump,
    validate_hypotheses,
)
from .solver import SolverConfig, solve
from .theorems import (
    comparison_check,
    decay_diagnostic,
    m_infinity_estimate,
    mass_bound_check,
    oracle_riccati,
    persistence_check,
    positivity_check,
    power_condition_integral,
)

__all__ = ["CriterionResult", "CRITERIA", "run_all", "band_limited_field", "random_problem", "unit_gaussian"]

C = CoefficientFn
SEED = 20240531


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0
    time_limit: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {status}  {self.title}  [{self.elapsed:.1f}s / {self.time_limit:g}s]"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "details": self.details,
                "time_limit": self.time_limit}


def _timed(number: int, title: str, limit: float):
    def wrap(fn: Callable[[], tuple[bool, dict]]):
        @wraps(fn)
        def run() -> CriterionResult:
            t0 = time.perf_counter()
            ok, details = fn()
            el = time.perf_counter() - t0
            details["within_time_limit"] = el < limit
            return CriterionResult(number, title, bool(ok and el < limit), details, el, limit)

        run.number = number
        run.title = title
        return run

    return wrap


def band_limited_field(grid, rng: np.random.Generator, max_mode: int = 8, amplitude: float = 1.0) -> Field:
    """Random real trigonometric polynomial with integer modes up to ``max_mode`` per axis."""
    vals = np.zeros(grid.shape)
    w = math.pi / grid.L
    modes = range(-max_mode, max_mode + 1)
    if grid.d == 1:
        for m in modes:
            a, b = rng.normal(size=2) / (1 + abs(m))
            vals += a * np.cos(w * m * grid.coords[0]) + b * np.sin(w * m * grid.coords[0])
    else:
        X, Y = grid.coords
        for m1 in modes:
            for m2 in modes:
                a, b = rng.normal(size=2) / (1 + abs(m1) + abs(m2))
                ph = w * (m1 * X + m2 * Y)
                vals += a * np.cos(ph) + b * np.sin(ph)
    vals *= amplitude / np.max(np.abs(vals))
    return Field(grid, vals)


def unit_gaussian(grid) -> Field:
    """Gaussian with sup 1 and integral 1 (in d = 1)."""
    return gaussian_bumps(grid, [(1.0, 0.0, 1.0 / math.sqrt(2.0 * math.pi))])


# ---------------------------------------------------------------------------
# kernel criteria


@_timed(1, "kernel normalization", 5.0)
def criterion_1():
    g = make_grid(1, 1024, 40.0)
    rep = check_normalization([0.6, 1.0, 1.5, 1.9], [0.1, 1.0, 10.0], g, tol=1e-10)
    return rep.all_passed, {"max_error": max(c.context["error"] for c in rep)}


@_timed(2, "semigroup identity", 5.0)
def criterion_2():
    g = make_grid(1, 1024, 40.0)
    rng = np.random.default_rng(SEED)
    errs = {}
    ok = True
    for a in (0.6, 1.0, 1.5, 1.9):
        f = band_limited_field(g, rng, 16)
        rep = check_semigroup(a, f, 1.0, 2.0, tol=1e-12)
        errs[f"alpha={a:g}"] = rep.checks[0].context["sup_error"]
        ok &= rep.all_passed
    return ok, {"sup_errors": errs}


@_timed(3, "alpha=1 kernel equals the Cauchy density", 10.0)
def criterion_3():
    g = make_grid(1, 4096, 40.0)
    taus = [0.5, 1.0, 2.0]
    literal = check_cauchy(taus, g, x_max=5.0, tol=1e-4)
    wrapped = check_cauchy(taus, g, x_max=5.0, tol=1e-4, wrapped=True)
    return literal.all_passed, {
        "max_error_free_line": {f"{c.context['tau']:g}": c.context["max_error"] for c in literal},
        "max_error_periodized": {f"{c.context['tau']:g}": c.context["max_error"] for c in wrapped},
        "periodized_passes": wrapped.all_passed,
    }


@_timed(4, "kernel norm decay exponents", 30.0)
def criterion_4():
    taus = np.geomspace(0.5, 8.0, 9)
    # heavier tails need larger boxes before the torus stops biasing the fit
    setups = [(1.5, 1024, 40.0), (1.0, 8192, 160.0), (0.8, 16384, 640.0)]
    ok = True
    out = {}
    for a, n, L in setups:
        rep = verify_kernel_bounds(a, make_grid(1, n, L), taus, [2.0, np.inf], slope_tol=0.02, relative=True)
        ok &= rep.all_passed
        out[f"alpha={a:g}"] = {c.name: {"verdict": c.verdict, "slope": c.context["fitted_slope"],
                                        "target": c.context["target_slope"]} for c in rep}
    return ok, out


@_timed(5, "direct singular integral vs multiplier", 30.0)
def criterion_5():
    g = make_grid(1, 1024, 40.0)
    rng = np.random.default_rng(SEED + 5)
    f = band_limited_field(g, rng, 8)
    pts = [[0.0], [1.3], [-7.1]]
    ok = True
    out = {}
    for a in (0.8, 1.5):
        rep = check_direct_vs_spectral(a, f, pts, r=0.1, R=50.0, tol=1e-2)
        ok &= rep.all_passed
        out[f"alpha={a:g}"] = [{"error": c.context["error"], "tail_bound": c.context["tail_bound"]} for c in rep]
    return ok, out


@_timed(6, "generator identity, first order in delta", 10.0)
def criterion_6():
    g = make_grid(1, 1024, 40.0)
    f = gaussian_bumps(g, [(1.0, 0.0, 1.0)])
    ok = True
    out = {}
    for a in (0.8, 1.5):
        rep = check_generator(a, f, 1.0, (1e-2, 1e-3, 1e-4))
        ok &= rep.all_passed
        out[f"alpha={a:g}"] = rep.checks[0].context["fitted_order"]
    return ok, out


# ---------------------------------------------------------------------------
# solver criteria


@_timed(7, "Riccati oracle convergence", 10.0)
def criterion_7():
    g = make_grid(1, 1024, 40.0)
    spec = ProblemSpec(1.5, g, C.constant(1.0), C.constant(1.0), Nonlinearity.square(), Field.constant(g, 1.0))
    exact = float(oracle_riccati(1.0, spec.h, 2.0)(1.0))
    errs = {}
    for n in (32, 64, 128):
        tr = solve(spec, SolverConfig(1.0, n_steps=n), force=True)  # constant data has no edge decay
        errs[n] = abs(float(np.mean(tr.final.values)) - exact) / exact
    orders = [math.log2(errs[32] / errs[64]), math.log2(errs[64] / errs[128])]
    return errs[64] < 1e-4 and min(orders) >= 2.0, {"rel_errors": errs, "orders": orders}


@_timed(8, "pure diffusion exactness", 10.0)
def criterion_8():
    g = make_grid(1, 1024, 40.0)
    u0 = gaussian_bumps(g, [(1.0, 0.0, 1.0)])
    spec = ProblemSpec(1.5, g, C.constant(1.0), C.constant(0.0), Nonlinearity.square(), u0)
    tr = solve(spec, SolverConfig(2.0, n_steps=32))
    ref = np.fft.ifft(make_kernel(1.5, 2.0, g).multiplier * np.fft.fft(u0.values)).real
    err = float(np.max(np.abs(tr.final.values - ref)))
    return err < 1e-8, {"sup_error": err}


def random_problem(rng: np.random.Generator, grid) -> ProblemSpec:
    """One admissible draw of (alpha, k, h, phi, u0) with nonnegative u0."""
    alpha = float(rng.uniform(1.1, 1.9))
    kk = rng.integers(4)
    if kk == 0:
        k = C.constant(float(rng.uniform(0.5, 2.0)))
    elif kk == 1:
        k = C.exponential(float(rng.uniform(0.2, 1.0)))
    elif kk == 2:
        k = C.decaying(float(rng.uniform(0.2, 1.0)), float(rng.uniform(0.5, 2.0)))
    else:
        k = C.power(float(rng.uniform(0.0, alpha - 1.0)), float(rng.uniform(0.5, 2.0)))
    hk = rng.integers(4)
    if hk == 0:
        h = C.constant(float(rng.uniform(0.5, 2.0)))
    elif hk == 1:
        h = C.decaying(float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.5, 2.0)))
    elif hk == 2:
        h = C.power(float(rng.uniform(0.0, 1.0)))
    else:
        h = C.table([0.0, 0.5, 1.0, 2.0], [float(v) for v in rng.uniform(0.0, 2.0, 4)])
    pk = rng.integers(3)
    phi = [Nonlinearity.square(), Nonlinearity.power(float(rng.uniform(1.5, 3.0))), Nonlinearity.cosh()][pk]
    terms = Field.constant(grid, 0.0)
    for _ in range(int(rng.integers(1, 4))):
        amp, c = float(rng.uniform(0.2, 1.5)), float(rng.uniform(-5.0, 5.0))
        if rng.random() < 0.7:
            terms = terms + gaussian_bumps(grid, [(amp, c, float(rng.uniform(0.3, 1.5)))])
        else:
            terms = terms + smooth_bump(grid, amp, c, float(rng.uniform(0.5, 2.0)))
    return ProblemSpec(alpha, grid, k, h, phi, terms)


@lru_cache(maxsize=1)
def _battery():
    g = make_grid(1, 1024, 40.0)
    rng = np.random.default_rng(SEED + 9)
    cfg = SolverConfig(2.0, n_steps=64)
    runs = []
    while len(runs) < 10:
        spec = random_problem(rng, g)
        if not validate_hypotheses(spec, cfg.t_max).ok:
            continue
        runs.append((spec, solve(spec, cfg)))
    return tuple(runs)


@_timed(9, "positivity over a randomized battery", 120.0)
def criterion_9():
    mins = []
    ok = True
    for spec, tr in _battery():
        rep = positivity_check(tr)
        ok &= rep["positivity"].passed
        mins.append(float(np.min(tr.min_u)))
    return ok, {"min_u": mins}


@_timed(10, "mass identity, monotone mass, mass lower bound", 120.0)
def criterion_10():
    ok = True
    out = []
    for spec, tr in _battery():
        rep = mass_bound_check(tr, spec, tol_abs=1e-8)
        sel = [rep[n] for n in ("mass_identity", "mass_monotone", "mass_lower_bound")]
        ok &= all(c.passed for c in sel)
        out.append({c.name: c.margin for c in sel})
    return ok, {"margins": out}


@_timed(11, "persistence with integrable h", 60.0)
def criterion_11():
    g = make_grid(1, 1024, 40.0)
    spec = ProblemSpec(1.5, g, C.constant(1.0), C.decaying(1.0), Nonlinearity.square(), unit_gaussian(g))
    tr = solve(spec, SolverConfig(20.0, n_steps=400))
    rep = persistence_check(tr, spec, tol=1e-3)
    est = rep["persistence"].context["M_inf"]
    ok = rep.all_passed and est >= math.exp(-1.0) - 1e-3 and est > 0
    return ok, {"M_inf": est, "bound": math.exp(-1.0), "uncertainty": rep["persistence"].context["uncertainty"]}


@_timed(12, "comparison of ordered data", 60.0)
def criterion_12():
    g = make_grid(1, 1024, 40.0)
    spec = ProblemSpec(1.5, g, C.constant(1.0), C.constant(1.0), Nonlinearity.square(), unit_gaussian(g))
    rep = comparison_check(spec, spec.with_initial(spec.u0 * 2.0), SolverConfig(5.0, n_steps=100), tol=1e-10)
    c = rep["comparison"]
    return c.passed, {"min_v_minus_u": c.margin, "min_after_start": c.context["min_after_start"]}


@_timed(13, "L^p diagnostic with integrable k", 120.0)
def criterion_13():
    g = make_grid(1, 1024, 40.0)
    cfg = SolverConfig(20.0, n_steps=400)
    spec = ProblemSpec(1.5, g, C.decaying(1.0), C.decaying(1.0), Nonlinearity.power(2.0), unit_gaussian(g))
    tr = solve(spec, cfg)
    ok = True
    out = {}
    for p in (1.0, 2.0):
        d = decay_diagnostic(tr, spec, p)
        c = d.report[f"decay_p={p:g}"]
        ok &= c.passed
        out[f"p={p:g}"] = {"peak": c.context["peak"], "final": c.context["final"],
                           "worst_increase": c.context["worst_increase"]}
    # companion: K(t) -> infinity (k = 1), where the limit does go to zero
    comp = ProblemSpec(1.5, g, C.constant(1.0), C.decaying(1.0), Nonlinearity.power(2.0), unit_gaussian(g))
    trc = solve(comp, cfg)
    out["companion_k_constant"] = {}
    for p in (1.0, 2.0):
        c = decay_diagnostic(trc, comp, p, require_hypothesis=False).report[f"decay_p={p:g}"]
        out["companion_k_constant"][f"p={p:g}"] = {"verdict": c.verdict, "final_over_peak": c.context["final"] / c.context["peak"]}
    return ok, out


@_timed(14, "power-law persistence with non-integrable h", 120.0)
def criterion_14():
    # L = 160 keeps the kernel width below L/4 up to t = 5.5 (K = e^t - 1)
    g = make_grid(1, 4096, 160.0)
    spec = ProblemSpec(1.5, g, C.exponential(1.0), C.constant(1.0), Nonlinearity.power(2.0), unit_gaussian(g))
    T = 5.5
    finite, val = power_condition_integral(spec.h, spec.k, 1.5, 1, 2.0)
    tr = solve(spec, SolverConfig(T, n_steps=220))
    est = m_infinity_estimate(tr.t, tr.M)
    h_total = spec.h.total()
    wraps = make_kernel(1.5, float(spec.k.antiderivative(T)), g).wraps
    ok = finite and est.value > 0 and math.isinf(h_total)
    return ok, {"integral": val, "M_inf": est.value, "uncertainty": est.uncertainty, "h_total": h_total,
                "kernel_wraps_at_t_max": wraps}


@_timed(15, "condition (d) screening", 10.0)
def criterion_15():
    fin, sup = check_condition_d(C.constant(1.0), 1.5, 1.0)
    div1, _ = check_condition_d(C.constant(1.0), 0.5, 1.0)
    div2, _ = check_condition_d(C.exponential(1.0), 1.0, 1.0)
    ok = fin and abs(sup - 3.0) <= 1e-6 and not div1 and not div2
    return ok, {"sup_alpha_1.5": sup, "alpha_0.5_finite": div1, "alpha_1_exp_finite": div2}


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8,
            criterion_9, criterion_10, criterion_11, criterion_12, criterion_13, criterion_14, criterion_15]


def run_all(echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    for crit in CRITERIA:
        r = crit()
        results.append(r)
        if echo:
            echo(r.line())
    return results
