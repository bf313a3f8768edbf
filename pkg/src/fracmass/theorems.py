"""Turn trajectories into verdicts: mass bounds, persistence, L^p decay, comparison."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .grid import Field, lp_norm
from .kernel import make_kernel
from .kernel_checks import eventually_decreasing
from .problem import CoefficientFn, ProblemSpec
from .report import FAIL, PASS, TheoremReport
from .solver import SolverConfig, Trajectory, solve

__all__ = [
    "MassSeries",
    "MInfinity",
    "DecayDiagnostic",
    "lower_bound",
    "ode_y",
    "m_infinity_estimate",
    "mass_series",
    "mass_bound_check",
    "positivity_check",
    "persistence_check",
    "decay_diagnostic",
    "comparison_check",
    "power_condition_integral",
    "epsilon_persistence_check",
    "oracle_riccati",
]

MASS_TOL = 1e-8
IDENTITY_TOL = 1e-12
POSITIVITY_TOL = 1e-10


def _loss_rate(spec: ProblemSpec) -> float:
    """phi(S)/S with S = sup u0; the exponential rate in the mass lower bound."""
    S = spec.u0.sup_norm()
    return float(spec.phi(S)) / S if S > 0 else 0.0


def lower_bound(spec: ProblemSpec, t) -> np.ndarray:
    """||u0||_1 exp(-(phi(S)/S) H(t)), S = sup|u0|."""
    m0 = lp_norm(spec.u0, 1)
    H = np.asarray(spec.h.antiderivative(np.asarray(t, dtype=float)), dtype=float)
    return m0 * np.exp(-_loss_rate(spec) * H)


def ode_y(spec: ProblemSpec, times: Sequence[float]) -> np.ndarray:
    """Solve y' = -(phi(S)/S) h(t) y, y(0) = ||u0||_1, by an ODE integrator.

    Independent of ``lower_bound``: integrates log y with DOP853 and restarts
    at table nodes where h has kinks.
    """
    times = np.asarray(times, dtype=float)
    c = _loss_rate(spec)
    m0 = lp_norm(spec.u0, 1)
    if c == 0.0 or spec.h.is_zero():
        return np.full_like(times, m0)
    T = float(times.max())
    cuts = [0.0]
    if spec.h.kind == "table":
        cuts += [float(x) for x in spec.h.times if 0.0 < x < T]
    cuts.append(T)
    out = np.empty_like(times)
    z0 = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        sel = (times >= a) & (times <= b)
        sol = integrate.solve_ivp(lambda t, z: [-c * float(spec.h(t))], (a, b), [z0], method="DOP853",
                                  rtol=3e-14, atol=1e-16, t_eval=times[sel] if sel.any() else None, dense_output=True)
        if sel.any():
            out[sel] = sol.y[0]
        z0 = float(sol.sol(b)[0])
    out[times == 0.0] = 0.0
    return m0 * np.exp(out)


def oracle_riccati(c0: float, h: CoefficientFn, beta: float, T: Optional[float] = None) -> Callable:
    """Exact solution of u' = -h(t) u^beta, u(0) = c0 (spatially constant data)."""
    if c0 < 0 or beta <= 1:
        raise ValueError("need c0 >= 0 and beta > 1")

    def u(t):
        H = np.asarray(h.antiderivative(np.asarray(t, dtype=float)), dtype=float)
        if c0 == 0.0:
            return np.zeros_like(H)
        if beta == 2.0:
            return c0 / (1.0 + c0 * H)
        return c0 * (1.0 + (beta - 1.0) * c0 ** (beta - 1.0) * H) ** (-1.0 / (beta - 1.0))

    return u


@dataclass
class MInfinity:
    value: float
    uncertainty: float
    ratio: float  # geometric ratio of successive decrements; nan if not fitted
    fitted: bool


def m_infinity_estimate(times, M, window: float = 0.1) -> MInfinity:
    """Last value plus a geometric tail fitted on the final ``window`` of the time span.

    The window [t_a, t_c] is split at its midpoint t_b; with decrements
    D1 = M(t_b) - M(t_a), D2 = M(t_c) - M(t_b) and q = D2/D1 in [0, 1),
    the remaining change is D2 q/(1 - q).  Its magnitude is the uncertainty.
    """
    t = np.asarray(times, dtype=float)
    M = np.asarray(M, dtype=float)
    tc = t[-1]
    ta = tc - window * (tc - t[0])
    tb = 0.5 * (ta + tc)
    Ma, Mb, Mc = np.interp([ta, tb, tc], t, M)
    D1, D2 = Mb - Ma, Mc - Mb
    scale = max(abs(Mc), np.finfo(float).tiny)
    if abs(D2) <= 1e-15 * scale:
        return MInfinity(float(Mc), float(abs(D2)), 0.0, True)
    if D1 == 0.0 or D2 / D1 < 0 or D2 / D1 >= 1:
        # not geometric: report the last value with the last decrement as error
        return MInfinity(float(Mc), float(abs(D2)) if D1 != 0 else float(abs(Mc)), math.nan, False)
    q = D2 / D1
    tail = D2 * q / (1.0 - q)
    return MInfinity(float(Mc + tail), float(abs(tail)), float(q), True)


@dataclass
class MassSeries:
    times: np.ndarray
    M: np.ndarray
    lower_bound: np.ndarray
    ode_y: np.ndarray
    m_inf: MInfinity

    @property
    def M_infinity_estimate(self) -> float:
        return self.m_inf.value


def mass_series(traj: Trajectory, spec: ProblemSpec) -> MassSeries:
    t = traj.t
    return MassSeries(t, traj.M, lower_bound(spec, t), ode_y(spec, t), m_infinity_estimate(t, traj.M))


def mass_bound_check(traj: Trajectory, spec: ProblemSpec, tol_abs: float = MASS_TOL) -> TheoremReport:
    """Mass lower bound, ODE comparison, discrete mass identity and monotone mass."""
    rep = TheoremReport()
    ms = mass_series(traj, spec)
    if not traj.nonnegative_run:
        rep.inconclusive("mass_lower_bound", "M(t) >= ||u0||_1 exp(-phi(S)/S H(t))", "initial datum has negative values")
        return rep
    # t = 0 is equality; margins are taken over later times
    later = ms.times > 0 if ms.times.size > 1 else np.ones(ms.times.size, bool)
    for name, claim, ref in (("mass_lower_bound", "M(t) >= ||u0||_1 exp(-phi(S)/S H(t))", ms.lower_bound),
                             ("mass_above_ode", "M(t) >= y(t)", ms.ode_y)):
        gap = (ms.M - ref)[later]
        i = int(np.argmin(gap))
        rep.add_bound(name, claim, float(gap[i]), tol_abs, worst_t=float(ms.times[later][i]),
                      initial_gap=float(ms.M[0] - ref[0]))
    rel = np.abs(ms.lower_bound - ms.ode_y) / np.maximum(np.abs(ms.lower_bound), np.finfo(float).tiny)
    rep.add_bound("bound_equals_ode", "closed-form bound and ODE solution agree", IDENTITY_TOL - float(rel.max()))
    res = traj.series("mass_residual")
    rep.add_bound("mass_identity", "per-step discrete mass balance, relative", IDENTITY_TOL - float(res.max()),
                  max_residual=float(res.max()))
    inc = np.diff(ms.M)
    worst = float(inc.max()) if inc.size else 0.0
    rep.add_bound("mass_monotone", "M(t) nonincreasing", -worst, IDENTITY_TOL * float(ms.M[0]), max_increase=worst)
    rep.add_bound("mass_nonnegative", "M(t) >= 0", float(ms.M.min()))
    return rep


def positivity_check(traj: Trajectory, tol: float = POSITIVITY_TOL) -> TheoremReport:
    """min u over all output times, plus the sup and envelope invariants recorded by the solver."""
    rep = TheoremReport()
    if not traj.nonnegative_run:
        rep.inconclusive("positivity", "u0 >= 0 implies u >= 0", "initial datum has negative values")
        return rep
    mn = float(np.min(traj.min_u))
    rep.add_bound("positivity", "u0 >= 0 implies u >= 0", mn, tol, min_u=mn)
    env = float(np.max(traj.envelope_excess))
    rep.add_bound("upper_envelope", "u(t) <= p(K(t)) * u0", -env, 1e-8)
    sup0 = traj.max_u[0]
    rep.add_bound("sup_bound", "sup u(t) <= sup u0", sup0 - float(np.max(traj.max_u)), 1e-8)
    return rep


def persistence_check(traj: Trajectory, spec: ProblemSpec, tol: float = 1e-3) -> TheoremReport:
    """M(infinity) > 0 and above the limiting lower bound when int h < infinity."""
    rep = TheoremReport()
    claim = "M(inf) >= ||u0||_1 exp(-phi(S)/S int h) > 0"
    H_inf = spec.h.total()
    if not math.isfinite(H_inf):
        rep.inconclusive("persistence", claim, "int_0^inf h diverges; hypothesis unmet")
        return rep
    H_T = float(spec.h.antiderivative(traj.t[-1]))
    if H_inf > 0 and H_T < 0.99 * H_inf:
        rep.inconclusive("persistence", claim, "horizon too short: H(t_max) < 0.99 H(inf)", H_T=H_T, H_inf=H_inf)
        return rep
    est = m_infinity_estimate(traj.t, traj.M)
    lb = lp_norm(spec.u0, 1) * math.exp(-_loss_rate(spec) * H_inf)
    rep.add_bound("persistence", claim, est.value - lb, tol, M_inf=est.value, uncertainty=est.uncertainty, bound=lb)
    rep.add("persistence_positive", "M(inf) > 0", PASS if est.value > 0 else FAIL, est.value, M_inf=est.value)
    return rep


@dataclass
class DecayDiagnostic:
    times: np.ndarray
    values: np.ndarray
    interpolation_rhs: np.ndarray
    m_inf: float
    report: TheoremReport


def decay_diagnostic(traj: Trajectory, spec: ProblemSpec, p: float, m_inf: Optional[float] = None,
                     require_hypothesis: bool = True) -> DecayDiagnostic:
    """D_p(t) = K(t)^{(d/alpha)(1-1/p)} ||u(t) - M_inf p(K(t))||_p over snapshot times.

    Passes when D_p is eventually decreasing and ends below a tenth of its peak.
    Also checks ||g||_p <= ||g||_1^{1/2p} ||g||_{2p-1}^{1-1/2p} at every time.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    K_inf = spec.k.total()
    if require_hypothesis and not math.isfinite(K_inf):
        raise ValueError("hypothesis unmet: int_1^inf k diverges")
    if m_inf is None:
        m_inf = m_infinity_estimate(traj.t, traj.M).value
    g = spec.grid
    expo = (spec.d / spec.alpha) * (1.0 - 1.0 / p)
    ts, vals, rhs = [], [], []
    for t, u in zip(traj.snapshot_times, traj.snapshots):
        K = float(spec.k.antiderivative(t))
        if K <= 0.0:
            continue
        ker = make_kernel(spec.alpha, K, g).real_kernel.values
        diff = Field(g, u.values - m_inf * ker)
        ts.append(t)
        vals.append(K**expo * lp_norm(diff, p))
        rhs.append(lp_norm(diff, p) if p == 1 else
                   lp_norm(diff, 1) ** (1 / (2 * p)) * lp_norm(diff, 2 * p - 1) ** (1 - 1 / (2 * p)))
    ts, vals, rhs = map(np.asarray, (ts, vals, rhs))
    rep = TheoremReport()
    name = f"decay_p={p:g}"
    dec, worst = eventually_decreasing(vals)
    peak = float(vals.max())
    ratio_margin = 0.1 * peak - float(vals[-1])
    verdict = PASS if dec and ratio_margin > 0 else FAIL
    rep.add(name, "D_p eventually decreasing, final < 0.1 peak", verdict, ratio_margin if dec else -worst,
            peak=peak, final=float(vals[-1]), worst_increase=worst, M_inf=m_inf, hypothesis_met=math.isfinite(K_inf))
    unnorm = vals / np.array([float(spec.k.antiderivative(t)) ** expo for t in ts])
    interp_gap = float(np.min(rhs * (1 + 1e-12) + 1e-300 - unnorm))
    rep.add_bound(f"interpolation_p={p:g}", "||g||_p <= ||g||_1^(1/2p) ||g||_(2p-1)^(1-1/2p)", interp_gap)
    return DecayDiagnostic(ts, vals, rhs, m_inf, rep)


def _check_pair(spec_u: ProblemSpec, spec_v: ProblemSpec):
    for attr in ("alpha", "grid", "k", "h"):
        if getattr(spec_u, attr) != getattr(spec_v, attr):
            raise ValueError(f"mismatched specs: {attr} differs")
    if spec_u.phi.describe() != spec_v.phi.describe():
        raise ValueError("mismatched specs: phi differs")
    if spec_u.u0.min() < 0 or np.any(spec_v.u0.values < spec_u.u0.values):
        raise ValueError("comparison needs v0 >= u0 >= 0")


def comparison_check(spec_u: ProblemSpec, spec_v: ProblemSpec, cfg: SolverConfig, tol: float = POSITIVITY_TOL,
                     *, force: bool = False, runs: Optional[tuple] = None) -> TheoremReport:
    """Solve both problems and check min over time and space of v - u >= -tol."""
    _check_pair(spec_u, spec_v)
    if runs is None:
        cfg1 = dataclasses.replace(cfg, snapshot_stride=1)
        runs = (solve(spec_u, cfg1, force=force), solve(spec_v, cfg1, force=force))
    tu, tv = runs
    diffs = [float(np.min(b.values - a.values)) for a, b in zip(tu.snapshots, tv.snapshots)]
    margin = min(diffs)
    rep = TheoremReport()
    rep.add_bound("comparison", "v0 >= u0 >= 0 implies v >= u", margin, tol,
                  min_after_start=min(diffs[1:]) if len(diffs) > 1 else margin, n_times=len(diffs))
    return rep


def power_condition_integral(h: CoefficientFn, k: CoefficientFn, alpha: float, d: int, beta: float,
                             T_upper: float = 50.0) -> tuple[bool, float]:
    """int_1^inf h(s) K(s)^{-(d/alpha)(beta-1)} ds: quadrature on [1, T_upper] plus an analytic tail bound."""
    if beta <= 1:
        raise ValueError("beta must be > 1")
    e = (d / alpha) * (beta - 1.0)
    if float(k.antiderivative(1.0)) <= 0.0:
        return False, math.inf

    def f(s):
        return float(h(s)) * float(k.antiderivative(s)) ** (-e)

    pts = None
    if h.kind == "table" or k.kind == "table":
        nodes = [x for c in (h, k) if c.kind == "table" for x in c.times]
        pts = sorted(x for x in set(nodes) if 1.0 < x < T_upper) or None
    body, _ = integrate.quad(f, 1.0, T_upper, epsabs=0.0, epsrel=1e-12, limit=500, points=pts)

    A, sigma, a = h.asymptotic_upper(T_upper)
    B, rho, b = k.antiderivative_lower(T_upper)
    if A == 0.0:
        return True, body
    lam = e * b - a
    gam = sigma - e * rho
    C = A * B ** (-e)
    T = T_upper
    if lam > 0:
        if gam <= 0:
            tail = C * T**gam * math.exp(-lam * T) / lam
        else:
            tail = C * lam ** (-gam - 1) * special.gamma(gam + 1) * special.gammaincc(gam + 1, lam * T)
    elif lam == 0 and gam < -1:
        tail = C * T ** (gam + 1) / (-gam - 1)
    else:
        return False, math.inf
    return True, float(body + tail)


def epsilon_persistence_check(spec: ProblemSpec, cfg: SolverConfig, epsilons: Sequence[float],
                              *, force: bool = False, T_upper: float = 50.0) -> TheoremReport:
    """Persistence for scaled data eps*u0 under the power-law integrability condition.

    For each eps: M_eps(inf) > 0, u >= u_eps (comparison with the eps = 1 run),
    and r(eps) = (1/eps) int h ||u_eps||_beta^beta decreasing toward 0 with eps.
    The last integral is the solver's accumulated reaction loss.
    """
    if not spec.phi.is_power:
        raise ValueError("epsilon persistence needs a power nonlinearity")
    rep = TheoremReport()
    beta = spec.phi.beta
    finite, val = power_condition_integral(spec.h, spec.k, spec.alpha, spec.d, beta, T_upper)
    rep.add("power_condition", "int_1^inf h K^{-(d/alpha)(beta-1)} < inf", PASS if finite else FAIL,
            1.0 if finite else -1.0, value=val if finite else None)
    if not finite:
        rep.inconclusive("eps_persistence", "M_eps(inf) > 0", "power-law integrability condition fails")
        return rep
    cfg1 = dataclasses.replace(cfg, snapshot_stride=1)
    eps_sorted = sorted(set(float(e) for e in epsilons) | {1.0}, reverse=True)
    runs = {e: solve(spec.scaled(e), cfg1, force=force) for e in eps_sorted}
    base = runs[1.0]
    ratios = []
    for e in eps_sorted:
        tr = runs[e]
        est = m_infinity_estimate(tr.t, tr.M)
        rep.add(f"eps_persistence_eps={e:g}", "M_eps(inf) > 0", PASS if est.value > 0 else FAIL, est.value,
                M_inf=est.value, uncertainty=est.uncertainty)
        if e != 1.0:
            cmp_ = comparison_check(spec.scaled(e), spec, cfg1, runs=(tr, base))
            c = cmp_.checks[0]
            rep.add(f"eps_comparison_eps={e:g}", "u >= u_eps", c.verdict, c.margin, **c.context)
        ratios.append(float(np.sum(tr.series("loss"))) / e)
    r = np.asarray(ratios)
    decreasing = bool(np.all(np.diff(r) < 0)) if r.size > 1 else True
    rep.add("eps_ratio_decreasing", "(1/eps) int h ||u_eps||_beta^beta decreases as eps -> 0",
            PASS if decreasing else FAIL, float(-np.max(np.diff(r))) if r.size > 1 else 0.0,
            epsilons=eps_sorted, ratios=ratios)
    if r.size > 1:
        slope = math.log(r[-1] / r[-2]) / math.log(eps_sorted[-1] / eps_sorted[-2])
        rep.add_bound("eps_ratio_scaling", "ratio scales like eps^(beta-1) within 10%",
                      0.1 - abs(slope - (beta - 1.0)) / (beta - 1.0), slope=slope, target=beta - 1.0)
    return rep
