"""Mild-solution solver: restarted Duhamel equation with Picard iteration per step.

Each macro step [t_n, t_{n+1}] solves

    u(s_i) = p(K(t_n, s_i)) * u_n - sum_j w_ij h(s_j) p(K(s_j, s_i)) * phi(u(s_j))

on equispaced nodes s_0 = t_n < ... < s_m = t_{n+1}, with composite trapezoid
weights w_ij on [t_n, s_i].  The endpoint kernel p(0) is the identity.  All
kernel applications are done on the Fourier side; the zero mode of every
multiplier is exactly one, so the discrete mass balance holds to roundoff.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .grid import Field, lp_norm
from .kernel import make_kernel
from .problem import ProblemSpec, validate_hypotheses

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "StepResult",
    "Trajectory",
    "PicardError",
    "HypothesisError",
    "step",
    "step_detail",
    "step_horizon",
    "solve",
]

ENVELOPE_TOL = 1e-8
SUP_TOL = 1e-8
POSITIVITY_TOL = 1e-10


class PicardError(RuntimeError):
    """Picard iteration did not reach the tolerance; the step is too long."""


class HypothesisError(ValueError):
    """The problem data failed a hypothesis check and no override was given."""


@dataclass
class SolverConfig:
    t_max: float
    n_steps: int = 64
    substeps_per_step: int = 4
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    snapshot_stride: int = 1
    adaptive: bool = False
    adaptive_tol: float = 1e-8
    respect_horizon: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.substeps_per_step < 2:
            raise ValueError("substeps_per_step must be >= 2")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1 or self.snapshot_stride < 1:
            raise ValueError("picard_max_iter and snapshot_stride must be >= 1")


@dataclass
class StepResult:
    u: Field
    iterations: int
    loss: float  # sum_j w_j h(s_j) int phi(u(s_j)) over the step


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    max_u: list = field(default_factory=list)
    min_u: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    picard_iters: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    mass_residual: list = field(default_factory=list)
    envelope_excess: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    subdivided_steps: int = 0
    forced: bool = False
    nonnegative_run: bool = True
    final: Optional[Field] = None

    def series(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.series("times")

    @property
    def M(self) -> np.ndarray:
        return self.series("mass")

    def cumulative_loss(self) -> np.ndarray:
        return np.cumsum(self.series("loss"))

    def snapshot_at(self, t: float) -> Field:
        i = int(np.argmin(np.abs(np.asarray(self.snapshot_times) - t)))
        return self.snapshots[i]


def _trapezoid_weights(m: int, ds: float) -> np.ndarray:
    """W[i, j]: composite trapezoid weight of node j on [s_0, s_i]."""
    W = np.zeros((m + 1, m + 1))
    for i in range(1, m + 1):
        W[i, : i + 1] = ds
        W[i, 0] = W[i, i] = 0.5 * ds
    return W


def step_detail(u_n: Field, t_n: float, t_next: float, spec: ProblemSpec, cfg: SolverConfig) -> StepResult:
    if not t_next > t_n:
        raise ValueError(f"need t_n < t_next, got {t_n}, {t_next}")
    g = spec.grid
    m = cfg.substeps_per_step
    s = np.linspace(t_n, t_next, m + 1)
    W = _trapezoid_weights(m, (t_next - t_n) / m)
    hs = np.atleast_1d(spec.h(s))
    symbol = g.freq_norm**spec.alpha

    # E[i][j] = multiplier of p(K(s_j, s_i)); the diagonal is the identity
    E = [[None] * (m + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        for j in range(i + 1):
            K = float(spec.k.between(s[j], s[i]))
            E[i][j] = None if K == 0.0 else np.exp(-K * symbol)

    U_n = sfft.fftn(u_n.values)
    base = [U_n if E[i][0] is None else E[i][0] * U_n for i in range(m + 1)]
    nodes = [sfft.ifftn(b).real for b in base]
    nodes[0] = u_n.values

    react = [hs[j] != 0.0 for j in range(m + 1)]
    if not any(react):
        return StepResult(Field(g, nodes[m]), 1, 0.0)

    cell = g.cell_volume
    for it in range(1, cfg.picard_max_iter + 1):
        phis = [spec.phi(v) for v in nodes]
        Phi = [sfft.fftn(p) if react[j] else None for j, p in enumerate(phis)]
        new = [u_n.values]
        for i in range(1, m + 1):
            acc = base[i].copy()
            for j in range(i + 1):
                if not react[j]:
                    continue
                term = W[i, j] * hs[j] * Phi[j]
                acc -= term if E[i][j] is None else E[i][j] * term
            out = sfft.ifftn(acc)
            if np.max(np.abs(out.imag)) > 1e-10 * max(1.0, float(np.max(np.abs(out.real)))):
                raise FloatingPointError("imaginary residue in Duhamel update")
            new.append(out.real)
        if not all(np.all(np.isfinite(v)) for v in new):
            raise FloatingPointError(f"non-finite values in step [{t_n}, {t_next}]")
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(new[1:], nodes[1:]))
        nodes = new
        if diff < cfg.picard_tol:
            loss = sum(W[m, j] * hs[j] * cell * float(np.sum(phis[j])) for j in range(m + 1) if react[j])
            return StepResult(Field(g, nodes[m]), it, float(loss))
    raise PicardError(
        f"Picard iteration did not converge in {cfg.picard_max_iter} iterations on [{t_n}, {t_next}] (last change {diff:.3e})"
    )


def step(u_n: Field, t_n: float, t_next: float, spec: ProblemSpec, cfg: SolverConfig) -> Field:
    """Advance the mild solution from t_n to t_next."""
    return step_detail(u_n, t_n, t_next, spec, cfg).u


def step_horizon(t_n: float, sup_u: float, spec: ProblemSpec) -> float:
    """Longest step from t_n for which the Duhamel map is a contraction.

    Uses int_{t_n}^{t_n + dt} h <= 1 / (1 + phi(R) + phi'(R)), R = sup|u| + 1;
    at t_n = 0 this is the usual local existence time.
    """
    h = spec.h
    if h.is_zero():
        return math.inf
    R = sup_u + 1.0
    target = 1.0 / (1.0 + float(spec.phi(R)) + float(spec.phi.derivative(R)))
    H0 = float(h.antiderivative(t_n))
    t_end = h.inverse_antiderivative(H0 + target)
    return t_end - t_n


def _horizon_pieces(u, t0, t1, spec, cfg) -> int:
    if not cfg.respect_horizon:
        return 1
    hz = step_horizon(t0, u.sup_norm(), spec)
    return max(1, int(math.ceil((t1 - t0) / hz * (1.0 + 1e-12)))) if t1 - t0 > hz else 1


def _advance(u, t0, t1, spec, cfg, traj, pieces=None):
    """One macro step, split into equal pieces if it exceeds the contraction horizon."""
    needed = _horizon_pieces(u, t0, t1, spec, cfg)
    pieces = max(needed, pieces or 1)
    if pieces > 1:
        traj.subdivided_steps += 1
    edges = np.linspace(t0, t1, pieces + 1)
    iters, loss = 0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = step_detail(u, float(a), float(b), spec, cfg)
        u, iters, loss = r.u, iters + r.iterations, loss + r.loss
    return u, iters, loss


def _record(traj, spec, t, u, iters, loss, m_prev, sup0, nonneg):
    M = float(u.grid.cell_volume * np.sum(u.values))
    traj.times.append(float(t))
    traj.mass.append(M)
    traj.max_u.append(u.max())
    traj.min_u.append(u.min())
    traj.l1.append(lp_norm(u, 1))
    traj.l2.append(lp_norm(u, 2))
    traj.picard_iters.append(int(iters))
    traj.loss.append(float(loss))
    if m_prev is None:
        traj.mass_residual.append(0.0)
    else:
        scale = max(abs(m_prev), np.finfo(float).tiny)
        traj.mass_residual.append(abs(M - (m_prev - loss)) / scale)
    K = float(spec.k.antiderivative(t))
    env = u if K == 0.0 else Field(u.grid, sfft.ifftn(make_kernel(spec.alpha, K, u.grid).multiplier * sfft.fftn(spec.u0.values)).real)
    excess = float(np.max(u.values - env.values))
    traj.envelope_excess.append(excess)
    if nonneg and m_prev is not None:
        if u.min() < -POSITIVITY_TOL:
            traj.violations.append({"t": t, "invariant": "positivity", "magnitude": -u.min()})
        if u.max() > sup0 + SUP_TOL:
            traj.violations.append({"t": t, "invariant": "sup_bound", "magnitude": u.max() - sup0})
        if excess > ENVELOPE_TOL:
            traj.violations.append({"t": t, "invariant": "envelope", "magnitude": excess})
        if M > m_prev + 1e-12 * max(abs(m_prev), 1.0):
            traj.violations.append({"t": t, "invariant": "monotone_mass", "magnitude": M - m_prev})


def solve(spec: ProblemSpec, cfg: SolverConfig, *, force: bool = False) -> Trajectory:
    """March the mild solution over [0, t_max].

    Hypotheses are validated first (unless already validated); a failed
    check aborts unless ``force`` is set, in which case the trajectory
    records ``forced=True``.  Invariant violations are recorded, not raised.
    A step error carries the partial trajectory as ``exc.trajectory``.
    """
    report = spec.hypothesis_report or validate_hypotheses(spec, cfg.t_max, require_nonnegative=False)
    if not report.ok and not force:
        names = ", ".join(c.name for c in report.failed)
        raise HypothesisError(f"hypotheses failed: {names} (use force to override)")

    u = spec.u0
    nonneg = u.min() >= 0.0
    sup0 = u.sup_norm()
    traj = Trajectory(forced=force and not report.ok, nonnegative_run=nonneg)
    _record(traj, spec, 0.0, u, 0, 0.0, None, sup0, nonneg)
    traj.snapshot_times.append(0.0)
    traj.snapshots.append(u)

    try:
        if cfg.adaptive:
            _solve_adaptive(spec, cfg, traj, u, sup0, nonneg)
        else:
            _solve_uniform(spec, cfg, traj, u, sup0, nonneg)
    except (PicardError, FloatingPointError) as exc:
        exc.trajectory = traj  # partial results up to the failing step
        raise
    if traj.violations:
        log.warning("%d invariant violations recorded", len(traj.violations))
    return traj


def _solve_uniform(spec, cfg, traj, u, sup0, nonneg):
    edges = np.linspace(0.0, cfg.t_max, cfg.n_steps + 1)
    for n in range(cfg.n_steps):
        t0, t1 = float(edges[n]), float(edges[n + 1])
        m_prev = traj.mass[-1]
        u, iters, loss = _advance(u, t0, t1, spec, cfg, traj)
        _record(traj, spec, t1, u, iters, loss, m_prev, sup0, nonneg)
        if (n + 1) % cfg.snapshot_stride == 0 or n + 1 == cfg.n_steps:
            traj.snapshot_times.append(t1)
            traj.snapshots.append(u)
    traj.final = u


def _solve_adaptive(spec, cfg, traj, u, sup0, nonneg):
    """Step doubling: accept when one step and two half steps agree to adaptive_tol."""
    t = 0.0
    dt = cfg.t_max / cfg.n_steps
    accepted = 0
    while t < cfg.t_max * (1.0 - 1e-14):
        dt = min(dt, cfg.t_max - t)
        # the half steps must use pieces half as long as the full step's, or the estimate vanishes
        P = _horizon_pieces(u, t, t + dt, spec, cfg)
        full, it_full, _ = _advance(u, t, t + dt, spec, cfg, traj, P)
        mid, it_a, loss_a = _advance(u, t, t + 0.5 * dt, spec, cfg, traj, P)
        fine, it_b, loss_b = _advance(mid, t + 0.5 * dt, t + dt, spec, cfg, traj, P)
        err = lp_norm(full - fine, np.inf)
        if err <= cfg.adaptive_tol or dt < 1e-12 * cfg.t_max:
            m_prev = traj.mass[-1]
            t, u = t + dt, fine
            accepted += 1
            _record(traj, spec, t, u, it_a + it_b, loss_a + loss_b, m_prev, sup0, nonneg)
            if accepted % cfg.snapshot_stride == 0 or t >= cfg.t_max * (1.0 - 1e-14):
                traj.snapshot_times.append(t)
                traj.snapshots.append(u)
            if err < 0.25 * cfg.adaptive_tol:
                dt *= 2.0
        else:
            dt *= 0.5
    traj.final = u


def config_dict(cfg: SolverConfig) -> dict:
    return asdict(cfg)
