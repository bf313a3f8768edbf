"""Problem data: coefficients k, h, the nonlinearity phi, initial data, hypotheses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .grid import Field, Grid, lp_norm
from .report import FAIL, PASS, TheoremReport

__all__ = [
    "CoefficientFn",
    "Nonlinearity",
    "ProblemSpec",
    "K_between",
    "check_condition_d",
    "local_horizon",
    "validate_hypotheses",
    "gaussian_bumps",
    "smooth_bump",
    "edge_ratio",
]

COEFFICIENT_KINDS = ("constant", "power", "exponential", "decaying", "table")


@dataclass(frozen=True)
class CoefficientFn:
    """Nonnegative time coefficient with an exact antiderivative.

    kinds: ``constant`` a; ``power`` a t^b (b >= 0); ``exponential`` a e^{bt};
    ``decaying`` a e^{-bt} (b > 0); ``table`` piecewise linear through
    (times, values), held constant after the last node.
    """

    kind: str
    a: float = 1.0
    b: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("coefficient parameters must be finite")
        if self.kind != "table" and self.a < 0:
            raise ValueError(f"coefficient scale must be >= 0, got {self.a}")
        if self.kind == "power" and self.b < 0:
            raise ValueError("power exponent must be >= 0 for a continuous coefficient")
        if self.kind in ("exponential", "decaying") and self.b <= 0:
            raise ValueError(f"{self.kind} rate must be > 0")
        if self.kind == "table":
            t = np.asarray(self.times, float)
            v = np.asarray(self.values, float)
            if t.ndim != 1 or len(t) < 2 or len(t) != len(v):
                raise ValueError("table needs matching times/values with at least two nodes")
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ValueError("table times must start at 0 and increase")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("table values must be finite and >= 0")
            object.__setattr__(self, "times", tuple(float(x) for x in t))
            object.__setattr__(self, "values", tuple(float(x) for x in v))

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "CoefficientFn":
        return cls("constant", a=float(c))

    @classmethod
    def power(cls, sigma: float, a: float = 1.0) -> "CoefficientFn":
        return cls("power", a=float(a), b=float(sigma))

    @classmethod
    def exponential(cls, rate: float, a: float = 1.0) -> "CoefficientFn":
        return cls("exponential", a=float(a), b=float(rate))

    @classmethod
    def decaying(cls, rate: float, a: float = 1.0) -> "CoefficientFn":
        return cls("decaying", a=float(a), b=float(rate))

    @classmethod
    def table(cls, times: Sequence[float], values: Sequence[float]) -> "CoefficientFn":
        return cls("table", times=tuple(times), values=tuple(values))

    # evaluation ---------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.a, self.b
        if self.kind == "constant":
            out = np.full_like(t, a)
        elif self.kind == "power":
            out = a * t**b if b > 0 else np.full_like(t, a)
        elif self.kind == "exponential":
            out = a * np.exp(b * t)
        elif self.kind == "decaying":
            out = a * np.exp(-b * t)
        else:
            out = np.interp(t, self.times, self.values)
        return out if out.ndim else float(out)

    def antiderivative(self, t):
        """int_0^t of the coefficient."""
        t = np.asarray(t, dtype=float)
        a, b = self.a, self.b
        if self.kind == "constant":
            out = a * t
        elif self.kind == "power":
            out = a * t ** (b + 1.0) / (b + 1.0)
        elif self.kind == "exponential":
            out = a / b * np.expm1(b * t)
        elif self.kind == "decaying":
            out = -a / b * np.expm1(-b * t)
        else:
            out = self._table_antiderivative(t)
        return out if out.ndim else float(out)

    def _table_antiderivative(self, t):
        tt = np.asarray(self.times)
        vv = np.asarray(self.values)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vv[1:] + vv[:-1]) * np.diff(tt))])
        t = np.asarray(t, float)
        last = len(tt) - 1
        i = np.clip(np.searchsorted(tt, t, side="right") - 1, 0, last)
        nxt = np.minimum(i + 1, last)
        span = np.where(i < last, tt[nxt] - tt[i], 1.0)
        slope = np.where(i < last, (vv[nxt] - vv[i]) / span, 0.0)
        dt = t - tt[i]
        return cum[i] + vv[i] * dt + 0.5 * slope * dt * dt

    def between(self, s, t):
        """int_s^t of the coefficient, written to avoid cancellation where possible."""
        return self.window(t, np.asarray(t, float) - np.asarray(s, float))

    def window(self, t, w):
        """int_{t-w}^t of the coefficient, accurate for w much smaller than t."""
        t = np.asarray(t, dtype=float)
        w = np.asarray(w, dtype=float)
        a, b = self.a, self.b
        if self.kind == "constant":
            out = a * w
        elif self.kind == "power":
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(t > 0, w / np.where(t > 0, t, 1.0), 1.0)
                out = -a * t ** (b + 1.0) / (b + 1.0) * np.expm1((b + 1.0) * np.log1p(-np.minimum(ratio, 1.0)))
            out = np.where(ratio >= 1.0, a * t ** (b + 1.0) / (b + 1.0), out)
        elif self.kind == "exponential":
            out = -a / b * np.exp(b * t) * np.expm1(-b * w)
        elif self.kind == "decaying":
            out = a / b * np.exp(-b * t) * np.expm1(b * w)
        else:
            out = self._table_antiderivative(t) - self._table_antiderivative(t - w)
            # when [t-w, t] sits in the linear piece ending at t, integrate that piece directly
            tt = np.asarray(self.times)
            vv = np.asarray(self.values)
            last = len(tt) - 1
            j = np.clip(np.searchsorted(tt, t, side="left") - 1, 0, last)
            nxt = np.minimum(j + 1, last)
            slope = np.where(j < last, (vv[nxt] - vv[j]) / np.where(j < last, tt[nxt] - tt[j], 1.0), 0.0)
            v_t = vv[j] + slope * (t - tt[j])
            local = (v_t - 0.5 * slope * w) * w
            out = np.where(t - w >= tt[j], local, out)
        out = np.where(w == 0, 0.0, out)
        return out if out.ndim else float(out)

    def total(self) -> float:
        """int_0^inf of the coefficient (may be inf)."""
        if self.is_zero():
            return 0.0
        if self.kind == "decaying":
            return self.a / self.b
        if self.kind == "table" and self.values[-1] == 0.0:
            return float(self.antiderivative(self.times[-1]))
        return math.inf

    def is_zero(self) -> bool:
        if self.kind == "table":
            return all(v == 0.0 for v in self.values)
        return self.a == 0.0

    def inverse_antiderivative(self, y: float) -> float:
        """Smallest t with int_0^t = y; inf if the total never reaches y."""
        if y <= 0:
            return 0.0
        if self.total() <= y:
            return math.inf
        a, b = self.a, self.b
        if self.kind == "constant":
            return y / a
        if self.kind == "power":
            return (y * (b + 1.0) / a) ** (1.0 / (b + 1.0))
        if self.kind == "exponential":
            return math.log1p(b * y / a) / b
        if self.kind == "decaying":
            return -math.log1p(-b * y / a) / b
        hi = 1.0
        while self.antiderivative(hi) < y:
            hi *= 2.0
        return optimize.brentq(lambda t: self.antiderivative(t) - y, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def asymptotic_upper(self, T: float) -> tuple[float, float, float]:
        """(A, sigma, rate) with coefficient(s) <= A s^sigma e^{rate s} for s >= T."""
        if self.kind == "constant":
            return self.a, 0.0, 0.0
        if self.kind == "power":
            return self.a, self.b, 0.0
        if self.kind == "exponential":
            return self.a, 0.0, self.b
        if self.kind == "decaying":
            return self.a, 0.0, -self.b
        return max(self.values), 0.0, 0.0

    def antiderivative_lower(self, T: float) -> tuple[float, float, float]:
        """(A, rho, rate) with antiderivative(s) >= A s^rho e^{rate s} for s >= T."""
        if self.kind == "constant":
            return self.a, 1.0, 0.0
        if self.kind == "power":
            return self.a / (self.b + 1.0), self.b + 1.0, 0.0
        if self.kind == "exponential":
            return self.a / self.b * (-math.expm1(-self.b * T)), 0.0, self.b
        if self.kind == "decaying":
            return float(self.antiderivative(T)), 0.0, 0.0
        Tl = max(T, self.times[-1])
        v = self.values[-1]
        KT = float(self.antiderivative(Tl))
        if v > 0:
            return min(v, KT / Tl), 1.0, 0.0
        return KT, 0.0, 0.0

    def describe(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "times": list(self.times), "values": list(self.values)}
        if self.kind == "constant":
            return {"kind": "constant", "c": self.a}
        if self.kind == "power":
            return {"kind": "power", "a": self.a, "sigma": self.b}
        return {"kind": self.kind, "a": self.a, "rate": self.b}


def K_between(k: CoefficientFn, s: float, t: float) -> float:
    """int_s^t k(r) dr for 0 <= s <= t."""
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if s < 0:
        raise ValueError("times must be nonnegative")
    return float(k.between(s, t))


NONLINEARITY_KINDS = ("power", "square", "cosh")


@dataclass(frozen=True)
class Nonlinearity:
    """Convex reaction term: ``power`` |x|^beta (beta > 1), ``square`` x^2, ``cosh`` cosh(x) - 1."""

    kind: str
    beta: float = 2.0

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "square":
            object.__setattr__(self, "beta", 2.0)
        if self.kind == "power" and not self.beta > 1.0:
            raise ValueError(f"power nonlinearity needs beta > 1, got {self.beta}")

    @classmethod
    def power(cls, beta: float) -> "Nonlinearity":
        return cls("power", float(beta))

    @classmethod
    def square(cls) -> "Nonlinearity":
        return cls("square")

    @classmethod
    def cosh(cls) -> "Nonlinearity":
        return cls("cosh", beta=float("nan"))

    @property
    def is_power(self) -> bool:
        return self.kind in ("power", "square")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            out = x * x
        elif self.kind == "power":
            out = np.abs(x) ** self.beta
        else:
            # cosh(x) - 1 = 2 sinh(x/2)^2 without cancellation near 0
            out = 2.0 * np.sinh(0.5 * x) ** 2
        return out if out.ndim else float(out)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "square":
            out = 2.0 * x
        elif self.kind == "power":
            out = self.beta * np.sign(x) * np.abs(x) ** (self.beta - 1.0)
        else:
            out = np.sinh(x)
        return out if out.ndim else float(out)

    def describe(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "beta": self.beta}
        return {"kind": self.kind}


# ---------------------------------------------------------------------------
# initial data


def gaussian_bumps(grid: Grid, bumps: Sequence[tuple]) -> Field:
    """Sum of a * exp(-|x - c|^2 / (2 w^2)) over ``(a, center, w)`` triples."""
    vals = np.zeros(grid.shape)
    for amp, center, width in bumps:
        c = np.broadcast_to(np.asarray(center, float), (grid.d,))
        r2 = sum((X - ci) ** 2 for X, ci in zip(grid.coords, c))
        vals += amp * np.exp(-r2 / (2.0 * width**2))
    return Field(grid, vals)


def smooth_bump(grid: Grid, amplitude: float = 1.0, center=0.0, radius: float = 1.0) -> Field:
    """Compactly supported C-infinity bump a * exp(1 - 1/(1 - |x-c|^2/R^2))."""
    c = np.broadcast_to(np.asarray(center, float), (grid.d,))
    r2 = sum((X - ci) ** 2 for X, ci in zip(grid.coords, c)) / radius**2
    vals = np.zeros(grid.shape)
    inside = r2 < 1.0
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return Field(grid, vals)


def edge_ratio(f: Field) -> float:
    """Largest |value| on the box boundary relative to the peak."""
    g = f.grid
    edge = np.concatenate([np.take(f.values, [0], axis=a).ravel() for a in range(g.d)])
    peak = f.sup_norm()
    return float(np.max(np.abs(edge)) / peak) if peak > 0 else 0.0


@dataclass
class ProblemSpec:
    alpha: float
    grid: Grid
    k: CoefficientFn
    h: CoefficientFn
    phi: Nonlinearity
    u0: Field
    hypothesis_report: Optional[TheoremReport] = field(default=None, compare=False)

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.u0.grid != self.grid:
            raise ValueError("u0 is not sampled on the problem grid")

    @property
    def d(self) -> int:
        return self.grid.d

    def with_initial(self, u0: Field) -> "ProblemSpec":
        return ProblemSpec(self.alpha, self.grid, self.k, self.h, self.phi, u0)

    def scaled(self, eps: float) -> "ProblemSpec":
        return self.with_initial(self.u0 * eps)

    def describe(self) -> dict:
        return {
            "alpha": self.alpha,
            "grid": {"d": self.grid.d, "n": self.grid.n, "L": self.grid.L},
            "k": self.k.describe(),
            "h": self.h.describe(),
            "phi": self.phi.describe(),
            "u0": {"sup": self.u0.sup_norm(), "l1": lp_norm(self.u0, 1), "min": self.u0.min()},
        }


# ---------------------------------------------------------------------------
# hypothesis checks

_LEVELS = tuple(2.0 ** -(2 ** (j + 3)) for j in range(7))  # 2^-8 ... 2^-512
_GROWTH = 0.10


def _condition_d_at(k: CoefficientFn, alpha: float, t: float, quad_tol: float) -> tuple[bool, float]:
    """int_0^t K(s,t)^{-1/alpha} ds at one t, via w = t - s = e^v."""
    if t == 0.0:
        return True, 0.0
    expo = 1.0 / alpha

    def piece(lo, hi):
        def f(v):
            w = math.exp(v)
            K = float(k.window(t, w))
            if K <= 0.0:
                return 1e300
            return math.exp(min(v - expo * math.log(K), 690.0))

        val, _ = integrate.quad(f, math.log(lo), math.log(hi), epsabs=0.0, epsrel=quad_tol, limit=200)
        return val

    estimates = []
    acc = 0.0
    hi = t
    for lev in _LEVELS:
        lo = t * lev
        if lo <= 0.0:
            break
        acc += piece(lo, hi)
        if not math.isfinite(acc):
            return False, math.inf
        estimates.append(acc)
        hi = lo
    growth = [(b - a) / a if a > 0 else math.inf for a, b in zip(estimates, estimates[1:])]
    if len(growth) >= 3 and all(g > _GROWTH for g in growth[-3:]):
        return False, math.inf
    eps = t * _LEVELS[len(estimates) - 1]
    kt = float(k(t))
    tail = 0.0
    if expo < 1.0 and kt > 0.0:
        # locally K(t - w, t) ~ k(t) w
        tail = kt ** (-expo) * eps ** (1.0 - expo) / (1.0 - expo)
    return True, estimates[-1] + tail


def check_condition_d(k: CoefficientFn, alpha: float, T: float, quad_tol: float = 1e-10) -> tuple[bool, float]:
    """Estimate sup_{t in [0,T]} int_0^t (int_s^t k)^{-1/alpha} ds.

    Returns ``(finite, sup)``; divergence gives ``(False, inf)``.  Divergence
    is declared when the estimate keeps growing by more than 10% across three
    successive refinements, either of the cutoff near s = t or of t towards 0.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    small = [T * 2.0**-i for i in range(40, 0, -1)]
    ts = sorted(set(small + list(np.linspace(T / 64, T, 64))))
    vals = []
    for t in ts:
        ok, v = _condition_d_at(k, alpha, float(t), quad_tol)
        if not ok:
            return False, math.inf
        vals.append(v)
    # blow-up as t -> 0: values at T 2^-i increase as i grows
    near0 = vals[:40][::-1]  # t = T/2, T/4, ... descending
    growth = [(b - a) / a if a > 0 else (math.inf if b > 0 else 0.0) for a, b in zip(near0, near0[1:])]
    if len(growth) >= 3 and all(g > _GROWTH for g in growth[-3:]):
        return False, math.inf
    i = int(np.argmax(vals))
    best = vals[i]
    if 0 < i < len(ts) - 1:
        res = optimize.minimize_scalar(lambda t: -_condition_d_at(k, alpha, t, quad_tol)[1],
                                       bounds=(ts[i - 1], ts[i + 1]), method="bounded", options={"xatol": 1e-10 * T})
        best = max(best, -float(res.fun))
    return True, float(best)


def local_horizon(u0_sup: float, phi: Nonlinearity, h: CoefficientFn) -> float:
    """Contraction horizon: H^{-1}(1 / (1 + phi(R) + phi'(R))) with R = sup|u0| + 1."""
    if u0_sup < 0:
        raise ValueError("u0_sup must be >= 0")
    if h.is_zero():
        return math.inf
    R = u0_sup + 1.0
    target = 1.0 / (1.0 + float(phi(R)) + float(phi.derivative(R)))
    return h.inverse_antiderivative(target)


def validate_hypotheses(spec: ProblemSpec, T: float, *, require_nonnegative: bool = True) -> TheoremReport:
    """Sampled checks of the existence hypotheses; report only."""
    report = TheoremReport()
    u0 = spec.u0
    sup = u0.sup_norm()

    # (a) phi convex, phi(0) = 0, phi > 0 away from 0
    R = max(1.0, 2.0 * sup)
    xs = np.linspace(-R, R, 401)
    ph = np.asarray(spec.phi(xs))
    nz = xs != 0.0
    second = ph[2:] - 2.0 * ph[1:-1] + ph[:-2]
    conv_margin = float(second.min()) + 1e-12 * max(1.0, float(np.abs(ph).max()))
    pos_margin = float(ph[nz].min())
    zero_val = abs(float(spec.phi(0.0)))
    ok = conv_margin >= 0 and pos_margin > 0 and zero_val == 0.0
    report.add("hypothesis_a_phi", "phi convex, phi(0)=0, phi>0 off zero", PASS if ok else FAIL,
               min(conv_margin, pos_margin) if zero_val == 0 else -zero_val, sample_range=R)

    # (b), (c) h and k nonnegative
    ts = np.linspace(0.0, T, 513)
    for label, coef in (("b_h", spec.h), ("c_k", spec.k)):
        m = float(np.min(coef(ts)))
        report.add_bound(f"hypothesis_{label}", f"{label[-1]}(t) >= 0 on [0, T]", m, T=T)

    # (d) integrability of K(s,t)^{-1/alpha}
    finite, sup_d = check_condition_d(spec.k, spec.alpha, T)
    report.add("hypothesis_d", "sup_t int_0^t K(s,t)^{-1/alpha} ds < inf", PASS if finite else FAIL,
               1.0 if finite else -1.0, sup_value=sup_d if finite else None, T=T)

    # (e) u0 bounded, decaying at the box edge; nonnegative with positive mass for theorem runs
    er = edge_ratio(u0)
    report.add_bound("hypothesis_e_edge", "u0 bounded and below 1e-8 of peak at the box edge", 1e-8 - er, edge_ratio=er)
    if require_nonnegative:
        report.add_bound("u0_nonnegative", "u0 >= 0", u0.min(), min=u0.min())
        report.add_bound("u0_positive_mass", "||u0||_1 > 0", lp_norm(u0, 1) - 1e-300, l1=lp_norm(u0, 1))
    spec.hypothesis_report = report
    return report
