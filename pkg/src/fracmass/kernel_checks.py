"""Numerical checks of the stable-kernel properties and of the generator.

Every function returns a :class:`TheoremReport`; none of them raise on a
violated property.  Under-resolved or torus-dominated configurations are
reported as inconclusive rather than failed.
"""

from __future__ import annotations

import warnings
from typing import Iterable, Sequence

import numpy as np

from .grid import Field, Grid, integral, lp_norm
from .kernel import (
    NEGATIVE_TOL,
    UnderResolvedWarning,
    apply_semigroup,
    cauchy_density,
    fractional_laplacian_direct,
    fractional_laplacian_spectral,
    kernel_field,
    make_kernel,
    spectral_derivative,
    trig_eval,
    wrapped_cauchy_density,
)
from .report import FAIL, PASS, TheoremReport

__all__ = [
    "fit_loglog_slope",
    "verify_kernel_bounds",
    "verify_limit_g",
    "check_normalization",
    "check_semigroup",
    "check_symmetry",
    "check_cauchy",
    "check_direct_vs_spectral",
    "check_generator",
    "check_minimum_sign",
    "eventually_decreasing",
]


def _quiet_kernel(alpha, tau, grid) -> Field:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderResolvedWarning)
        return kernel_field(make_kernel(alpha, tau, grid))


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    slope, icpt = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(icpt)


def eventually_decreasing(values: Sequence[float], rtol: float = 1e-12) -> tuple[bool, float]:
    """Is the second half of the series nonincreasing?

    Returns the verdict and the largest upward step (relative to the series
    maximum) found in that half.
    """
    v = np.asarray(values, float)
    tail = v[len(v) // 2 :]
    scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    worst = float(np.max(np.diff(tail), initial=-np.inf)) / scale
    return worst <= rtol, worst


def _mu_label(mu) -> str:
    return "inf" if mu == np.inf else f"{mu:g}"


def verify_kernel_bounds(
    alpha: float,
    grid: Grid,
    taus: Sequence[float],
    mus: Sequence[float],
    slope_tol: float = 0.02,
    relative: bool = False,
    check_periodization: bool = True,
) -> TheoremReport:
    """Fit the power-law decay of kernel norms in tau.

    For each mu: ||p(tau)||_mu ~ tau^{-(d/alpha)(1 - 1/mu)}.  Derivatives:
    ||d_x p||_1 ~ tau^{-1/alpha} and ||d_x^2 p||_1 ~ tau^{-2/alpha}.
    With ``relative=True`` the slope error is divided by |target slope|
    (absolute error is used when the target is zero).  A fit whose slope
    shifts by more than half the tolerance when the box is doubled is
    reported inconclusive.
    """
    taus = np.asarray(sorted(taus), float)
    if taus[0] <= 0 or taus[-1] / taus[0] < 10.0 - 1e-12:
        raise ValueError("taus must be positive and span at least one decade")
    if any(mu < 1 for mu in mus):
        raise ValueError("each mu must be >= 1")
    d = grid.d
    report = TheoremReport()
    ctx = dict(alpha=alpha, d=d, n=grid.n, L=grid.L, tau_min=float(taus[0]), tau_max=float(taus[-1]))

    kernels = [_quiet_kernel(alpha, t, grid) for t in taus]
    worst_neg = min(p.min() for p in kernels)
    wraps = [t for t in taus if make_kernel(alpha, t, grid).wraps]
    reason = ""
    if worst_neg < NEGATIVE_TOL:
        reason = f"under-resolved kernel (min value {worst_neg:.2e})"
    elif wraps:
        reason = f"kernel width exceeds L/4 for tau >= {min(wraps):g} (torus wrap)"

    def norm_series(ks):
        out = []
        for mu in mus:
            target = -(d / alpha) * (1.0 - 1.0 / mu) if mu != np.inf else -(d / alpha)
            out.append((f"kernel_norm_decay_mu={_mu_label(mu)}", "||p(t)||_mu <= c t^{-(d/alpha)(1-1/mu)}", target,
                        [lp_norm(p, mu) for p in ks]))
        out.append(("kernel_gradient_decay", "||d_x p(t)||_1 <= c t^{-1/alpha}", -1.0 / alpha,
                    [lp_norm(spectral_derivative(p, 1), 1) for p in ks]))
        out.append(("kernel_second_derivative_decay", "||d_x^2 p(t)||_1 <= c t^{-2/alpha}", -2.0 / alpha,
                    [lp_norm(spectral_derivative(p, 2), 1) for p in ks]))
        return out

    series = norm_series(kernels)
    # periodization sensitivity: refit on a box twice as large at the same spacing
    doubled = None
    if check_periodization and not reason and grid.size * 2**d <= 2**22:
        big = Grid(d, 2 * grid.n, 2.0 * grid.L)
        doubled = norm_series([_quiet_kernel(alpha, t, big) for t in taus])

    for idx, (name, claim, target, values) in enumerate(series):
        slope, icpt = fit_loglog_slope(taus, values)
        err = abs(slope - target)
        scale = abs(target) if relative and target != 0.0 else 1.0
        err /= scale
        constant = float(np.max(np.asarray(values) * taus ** (-target)))
        context = dict(ctx, fitted_slope=slope, target_slope=target, slope_error=err,
                       relative=relative and target != 0.0, empirical_constant=constant)
        why = reason
        if doubled is not None:
            shift = abs(fit_loglog_slope(taus, doubled[idx][3])[0] - slope) / scale
            context["periodization_shift"] = shift
            if shift > 0.5 * slope_tol:
                why = f"slope moves by {shift:.2e} when the box is doubled (torus-dominated)"
        if why:
            report.inconclusive(name, claim, why, margin=slope_tol - err, **context)
        else:
            report.add(name, claim, PASS if err < slope_tol else FAIL, slope_tol - err, **context)
    return report


def verify_limit_g(alpha: float, f: Field, taus: Sequence[float]) -> TheoremReport:
    """Track e(tau) = ||p(tau)*f - M p(tau)||_1 with M the integral of f."""
    taus = list(taus)
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be increasing")
    grid = f.grid
    M = integral(f)
    errs = []
    for t in taus:
        p = _quiet_kernel(alpha, t, grid)
        errs.append(lp_norm(apply_semigroup(make_kernel(alpha, t, grid), f) - M * p, 1))
    report = TheoremReport()
    claim = "||p(t)*f - M p(t)||_1 -> 0 as t -> inf"
    ctx = dict(alpha=alpha, n=grid.n, L=grid.L, taus=[float(t) for t in taus], errors=errs, mass=M)

    edge = np.concatenate([np.take(f.values, [0], axis=a).ravel() for a in range(grid.d)])
    if np.max(np.abs(edge)) > 1e-8 * max(f.sup_norm(), np.finfo(float).tiny):
        report.inconclusive("kernel_limit_g", claim, "f does not decay below 1e-8 of peak at the box edge", **ctx)
        return report
    wrapped = [t for t in taus if make_kernel(alpha, t, grid).wraps]
    if wrapped:
        report.inconclusive("kernel_limit_g", claim, f"kernel width exceeds L/4 for tau >= {min(wrapped):g}", **ctx)
        return report

    scale = max(lp_norm(f, 1), np.finfo(float).tiny)
    if max(errs) < 1e-12 * scale:
        report.add("kernel_limit_g", claim, PASS, 1e-12 * scale - max(errs), note="identically zero up to roundoff", **ctx)
        return report
    dec, worst = eventually_decreasing(errs)
    margin = errs[0] / 10.0 - errs[-1]
    ok = dec and margin > 0
    report.add("kernel_limit_g", claim, PASS if ok else FAIL, margin if dec else -worst, eventually_decreasing=dec, **ctx)
    return report


def check_normalization(alphas: Iterable[float], taus: Iterable[float], grid: Grid, tol: float = 1e-10) -> TheoremReport:
    report = TheoremReport()
    for a in alphas:
        for t in taus:
            err = abs(integral(_quiet_kernel(a, t, grid)) - 1.0)
            report.add_bound(f"kernel_mass_alpha={a:g}_tau={t:g}", "int p(t,x) dx = 1", tol - err, alpha=a, tau=t, error=err)
    return report


def check_semigroup(alpha: float, f: Field, t1: float, t2: float, tol: float = 1e-12) -> TheoremReport:
    g = f.grid
    two = apply_semigroup(make_kernel(alpha, t2, g), apply_semigroup(make_kernel(alpha, t1, g), f))
    one = apply_semigroup(make_kernel(alpha, t1 + t2, g), f)
    err = lp_norm(two - one, np.inf)
    m_err = float(np.max(np.abs(make_kernel(alpha, t1, g).multiplier * make_kernel(alpha, t2, g).multiplier
                                - make_kernel(alpha, t1 + t2, g).multiplier)))
    report = TheoremReport()
    report.add_bound("semigroup", "p(t+s) = p(t) * p(s)", tol - err, alpha=alpha, t1=t1, t2=t2, sup_error=err, multiplier_error=m_err)
    return report


def check_symmetry(alpha: float, tau: float, grid: Grid, tol: float = 1e-12) -> TheoremReport:
    p = _quiet_kernel(alpha, tau, grid).values
    # x -> -x maps index j to (n - j) mod n around the centre index n/2
    flipped = p
    for ax in range(grid.d):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    err = float(np.max(np.abs(p - flipped))) / float(np.max(np.abs(p)))
    report = TheoremReport()
    report.add_bound("kernel_symmetry", "p(t,x) = p(t,-x)", tol - err, alpha=alpha, tau=tau, rel_error=err)
    return report


def check_cauchy(taus: Iterable[float], grid: Grid, x_max: float = 5.0, tol: float = 1e-4, wrapped: bool = False) -> TheoremReport:
    """Compare the alpha=1 kernel with the Cauchy density on |x| <= x_max.

    ``wrapped=True`` compares with the periodized Cauchy density instead,
    which is the exact torus counterpart of the free-space formula.
    """
    if grid.d != 1:
        raise ValueError("closed form available in d = 1 only")
    x = grid.axis
    sel = np.abs(x) <= x_max + 1e-12
    report = TheoremReport()
    for t in taus:
        p = _quiet_kernel(1.0, t, grid).values
        ref = wrapped_cauchy_density(t, x, grid.L) if wrapped else cauchy_density(t, x)
        err = float(np.max(np.abs(p - ref)[sel]))
        name = f"{'wrapped_' if wrapped else ''}cauchy_tau={t:g}"
        report.add_bound(name, "alpha=1 kernel equals t/(pi(t^2+x^2))", tol - err, tau=t, max_error=err, n=grid.n, L=grid.L)
    return report


def check_direct_vs_spectral(alpha: float, f: Field, points, r: float | None = None, R: float = 50.0, tol: float = 1e-2) -> TheoremReport:
    spec = fractional_laplacian_spectral(alpha, f)
    report = TheoremReport()
    for i, x in enumerate(points):
        x = np.atleast_1d(np.asarray(x, float))
        direct = fractional_laplacian_direct(alpha, f, x, r=r, R=R)
        ref = float(trig_eval(spec, x[None, :])[0])
        err = abs(direct.value - ref)
        allowed = tol + direct.tail_bound
        report.add_bound(f"direct_vs_spectral_alpha={alpha:g}_pt{i}", "singular-integral form equals multiplier form",
                         allowed - err, alpha=alpha, x=x.tolist(), direct=direct.value, spectral=ref,
                         tail_bound=direct.tail_bound, error=err)
    return report


def check_generator(alpha: float, f: Field, tau: float, deltas: Sequence[float] = (1e-2, 1e-3, 1e-4),
                    order_tol: float = 0.1) -> TheoremReport:
    """Forward difference in tau of p(tau)*f against Lap_alpha(p(tau)*f).

    Passes when the sup-norm error decays with fitted order within
    ``order_tol`` of one.
    """
    g = f.grid
    base = apply_semigroup(make_kernel(alpha, tau, g), f)
    gen = fractional_laplacian_spectral(alpha, base)
    errs = []
    for dlt in deltas:
        ahead = apply_semigroup(make_kernel(alpha, tau + dlt, g), f)
        errs.append(lp_norm((ahead - base) * (1.0 / dlt) - gen, np.inf))
    order, _ = fit_loglog_slope(deltas, errs)
    report = TheoremReport()
    report.add("generator_first_order", "d/dt (p(t)*f) = Lap_alpha (p(t)*f)",
               PASS if abs(order - 1.0) < order_tol else FAIL, order_tol - abs(order - 1.0),
               alpha=alpha, tau=tau, deltas=list(deltas), errors=errs, fitted_order=order)
    return report


def check_minimum_sign(alpha: float, f: Field, tol: float = 1e-8) -> TheoremReport:
    """Lap_alpha f at the global minimum of f is >= 0 under the multiplier convention."""
    idx = np.unravel_index(np.argmin(f.values), f.grid.shape)
    val = float(fractional_laplacian_spectral(alpha, f).values[idx])
    report = TheoremReport()
    report.add_bound("minimum_sign", "Lap_alpha f >= 0 at a global minimum (multiplier sign convention)",
                     val + tol, alpha=alpha, value=val, index=[int(i) for i in idx])
    return report
