"""Symmetric alpha-stable heat kernels and the fractional Laplacian on the torus.

The kernel p(tau, .) is defined through its Fourier multiplier
exp(-tau |xi|^alpha); the fractional Laplacian is the multiplier -|xi|^alpha,
so that d/dtau (p(tau) * f) = Lap_alpha (p(tau) * f) holds exactly on the grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .grid import Field, Grid, GridError, apply_multiplier, convolve, inverse

__all__ = [
    "UnderResolvedWarning",
    "NEGATIVE_TOL",
    "KernelHandle",
    "make_kernel",
    "kernel_field",
    "apply_semigroup",
    "fractional_laplacian_spectral",
    "spectral_derivative",
    "direct_constant",
    "DirectValue",
    "fractional_laplacian_direct",
    "kernel_width",
    "cauchy_density",
    "wrapped_cauchy_density",
    "trig_eval",
]

# real-space kernel values below this mean the kernel is not resolved by the grid
NEGATIVE_TOL = -1e-8


class UnderResolvedWarning(RuntimeWarning):
    """Real-space kernel has negative values: grid too coarse for this tau."""


def _check_alpha(alpha: float):
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")


@dataclass(frozen=True)
class KernelHandle:
    """The stable kernel at effective time ``tau`` on ``grid``."""

    alpha: float
    tau: float
    grid: Grid

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")

    @cached_property
    def multiplier(self) -> np.ndarray:
        if self.tau == 0.0:
            m = np.ones(self.grid.shape)
        else:
            m = np.exp(-self.tau * self.grid.freq_norm**self.alpha)
        m.flags.writeable = False
        return m

    @cached_property
    def real_kernel(self) -> Field:
        return kernel_field(self)

    @property
    def width(self) -> float:
        return kernel_width(self.alpha, self.tau)

    @property
    def wraps(self) -> bool:
        """Kernel wider than a quarter of the box: torus images dominate."""
        return self.width > self.grid.L / 4.0

    def is_resolved(self) -> bool:
        return self.tau > 0 and self.real_kernel.min() >= NEGATIVE_TOL


@lru_cache(maxsize=512)
def _cached_kernel(alpha: float, tau: float, grid: Grid) -> KernelHandle:
    return KernelHandle(alpha, tau, grid)


def make_kernel(alpha: float, tau: float, grid: Grid) -> KernelHandle:
    _check_alpha(alpha)
    if not tau >= 0.0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return _cached_kernel(float(alpha), float(tau), grid)


def kernel_width(alpha: float, tau: float) -> float:
    """Characteristic spatial scale tau^(1/alpha)."""
    return float(tau) ** (1.0 / alpha)


def kernel_field(h: KernelHandle) -> Field:
    """Periodized kernel sampled on the grid, normalized to unit integral.

    The sample at index ``n//2`` is the value at x = 0.
    """
    if h.tau == 0.0:
        raise ValueError("tau = 0 is the Dirac delta and has no sampled representation")
    g = h.grid
    raw = np.fft.fftshift(np.fft.ifftn(h.multiplier).real) / g.cell_volume
    p = Field(g, raw)
    if p.min() < NEGATIVE_TOL:
        warnings.warn(
            f"kernel alpha={h.alpha} tau={h.tau} has min {p.min():.2e} on n={g.n}, L={g.L}: under-resolved",
            UnderResolvedWarning,
            stacklevel=2,
        )
    return p


def apply_semigroup(h: KernelHandle, f: Field) -> Field:
    """p(tau) * f on the torus."""
    if f.grid != h.grid:
        raise GridError("kernel and field live on different grids")
    if h.tau == 0.0:
        return f
    return convolve(h.multiplier, f)


def fractional_laplacian_spectral(alpha: float, f: Field) -> Field:
    _check_alpha(alpha)
    return apply_multiplier(-(f.grid.freq_norm**alpha), f)


def spectral_derivative(f: Field, order: int = 1, axis: int = 0) -> Field:
    """Spectral derivative along one axis; Nyquist mode dropped for odd orders."""
    g = f.grid
    k = g.freq_components[axis]
    m = (1j * k) ** order
    if order % 2:
        nyq = np.zeros(g.shape, dtype=bool)
        idx = [slice(None)] * g.d
        idx[axis] = g.n // 2
        nyq[tuple(idx)] = True
        m = np.where(nyq, 0.0, m)
    scale = max(f.sup_norm(), 1.0) * float(np.max(np.abs(m)) or 1.0)
    return inverse(g, m * np.fft.fftn(f.values), scale=scale)


# ---------------------------------------------------------------------------
# closed forms available for alpha = 1


def cauchy_density(t, x):
    """Free-space alpha=1 kernel t / (pi (t^2 + x^2)) in d = 1."""
    x = np.asarray(x, dtype=float)
    return t / (np.pi * (t * t + x * x))


def wrapped_cauchy_density(t, x, L):
    """Cauchy kernel periodized with period 2L (sum over all images)."""
    a = np.pi / L
    x = np.asarray(x, dtype=float)
    return np.sinh(a * t) / (2.0 * L * (np.cosh(a * t) - np.cos(a * x)))


# ---------------------------------------------------------------------------
# singular-integral representation


def _sphere_area(d: int) -> float:
    return 2.0 if d == 1 else 2.0 * np.pi


@lru_cache(maxsize=64)
def direct_constant(alpha: float, d: int) -> float:
    """Normalizing constant of the singular integral, calibrated on cos(x_1).

    Chosen so that ``c * int (f(x+z) - f(x) - grad f(x).z 1_{|z|<r}) |z|^{-d-alpha} dz``
    reproduces the multiplier -|xi|^alpha on the mode cos(x_1), i.e.
    ``c = 1 / int (1 - cos z_1) |z|^{-d-alpha} dz``, evaluated by quadrature.
    """
    _check_alpha(alpha)
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")

    # int_0^1 (1 - cos w) w^(-1-alpha) dw, termwise from the Taylor series of cos
    near = math.fsum((-1) ** (k + 1) / (math.factorial(2 * k) * (2 * k - alpha)) for k in range(1, 20))
    osc, _ = integrate.quad(lambda w: w ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=1.0, epsabs=1e-12, limlst=100)
    one_d = 2.0 * (near + 1.0 / alpha - osc)
    if d == 1:
        return 1.0 / one_d
    # integrate out the transverse coordinate: int (1 + s^2)^{-(2+alpha)/2} ds
    transverse, _ = integrate.quad(lambda s: (1.0 + s * s) ** (-(2.0 + alpha) / 2.0), -np.inf, np.inf, epsabs=0, epsrel=1e-13)
    return 1.0 / (one_d * transverse)


def trig_eval(f: Field, points: np.ndarray, *, gradient: bool = False, rel_cutoff: float = 1e-15):
    """Evaluate the trigonometric interpolant of ``f`` (and optionally its gradient).

    ``points`` has shape (m, d).  Modes with relative amplitude below
    ``rel_cutoff`` are skipped, which keeps band-limited fields cheap.
    """
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != g.d:
        raise ValueError(f"points must have {g.d} columns")
    coef, ks = _modes(f, rel_cutoff)
    shifted = pts + g.L
    vals = np.empty(len(pts))
    grads = np.empty((len(pts), g.d)) if gradient else None
    chunk = max(1, int(4_000_000 // max(len(coef), 1)))
    for start in range(0, len(pts), chunk):
        ph = np.exp(1j * (shifted[start : start + chunk] @ ks.T))
        vals[start : start + chunk] = (ph @ coef).real
        if gradient:
            grads[start : start + chunk] = (ph @ (coef[:, None] * 1j * ks)).real
    return (vals, grads) if gradient else vals


def _modes(f: Field, rel_cutoff: float = 1e-15):
    """Nonnegligible Fourier coefficients (normalized) and their wave vectors."""
    g = f.grid
    F = np.fft.fftn(f.values) / g.size
    amp = np.abs(F)
    keep = amp > rel_cutoff * max(amp.max(), np.finfo(float).tiny)
    return F[keep], np.stack([k[keep] for k in g.freq_components], axis=1)


def _psi(z: np.ndarray) -> np.ndarray:
    """(1 + iz - e^{iz}) / z^2, with its Taylor series near 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = z[small]
    out[small] = 0.5 - 1j * zs / 6.0 - zs**2 / 24.0 + 1j * zs**3 / 120.0
    zb = z[~small]
    out[~small] = (1.0 + 1j * zb - np.exp(1j * zb)) / zb**2
    return out


class DirectValue(NamedTuple):
    value: float
    tail_bound: float


def _gauss_panels(breaks: np.ndarray, order: int):
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    nodes = 0.5 * (b - a) * xg + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wg
    return nodes.ravel(), weights.ravel()


def _directions(d: int, n_theta: int):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(n_theta, 2.0 * np.pi / n_theta)


def fractional_laplacian_direct(
    alpha: float,
    f: Field,
    x: Sequence[float],
    r: float | None = None,
    R: float = 50.0,
    *,
    inner_order: int = 48,
    panel_order: int = 16,
) -> DirectValue:
    """Fractional Laplacian at one point from the singular-integral form.

    The ball |z| < r carries the gradient compensation, the annulus
    r < |z| < R does not, and |z| > R is dropped and bounded by
    ``2 ||f||_inf c int_{|z|>R} |z|^{-d-alpha} dz``.  The field is evaluated
    off-grid through its trigonometric interpolant (periodic extension).
    """
    _check_alpha(alpha)
    g = f.grid
    if r is None:
        r = 4.0 * g.dx
    if not (0.0 < r < R):
        raise ValueError(f"need 0 < r < R, got r={r}, R={R}")
    x0 = np.asarray(x, dtype=float).reshape(g.d)
    c = direct_constant(alpha, g.d)

    F = np.abs(np.fft.fftn(f.values))
    active = F > 1e-15 * max(F.max(), np.finfo(float).tiny)
    kmax = float(g.freq_norm[active].max()) if active.any() else 0.0
    n_theta = 2 * int(math.ceil(kmax * R)) + 32

    dirs, wdir = _directions(g.d, n_theta)
    (f0,) = trig_eval(f, x0[None, :])

    # inner ball: rho = r s^q, q = 1/(2-alpha).  Per mode the compensated
    # increment is -(k.theta)^2 rho^2 psi(rho k.theta), and rho^(1-alpha) d rho
    # becomes r^(2-alpha) q ds, so no power of s survives.
    q = 1.0 / (2.0 - alpha)
    s, ws = np.polynomial.legendre.leggauss(inner_order)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    rho_in = r * s**q
    coef, ks = _modes(f)
    coef = coef * np.exp(1j * ((x0 + g.L) @ ks.T))
    kt = dirs @ ks.T  # (dirs, modes)
    inner = 0.0
    for i in range(len(s)):
        z = rho_in[i] * kt
        inner += ws[i] * float(np.real(-(_psi(z) * kt**2) @ coef) @ wdir)
    inner *= r ** (2.0 - alpha) * q

    # annulus: geometric panels near r, then panels at most half a wavelength wide
    step = 0.5 if kmax == 0 else min(0.5, np.pi / (2.0 * kmax))
    head = np.geomspace(r, min(1.0, R), 12) if r < 1.0 else np.array([r])
    tail = np.arange(head[-1], R, step)
    breaks = np.unique(np.concatenate([head, tail, [R]]))
    rho_out, w_out = _gauss_panels(breaks, panel_order)
    pts = x0[None, None, :] + rho_out[:, None, None] * dirs[None, :, :]
    vals = trig_eval(f, pts.reshape(-1, g.d)).reshape(len(rho_out), len(dirs))
    outer = np.sum(w_out * rho_out ** (-1.0 - alpha) * ((vals - f0) @ wdir))

    total = inner + outer
    if not np.isfinite(total):
        raise FloatingPointError("direct quadrature produced a non-finite value")
    tail_bound = 2.0 * f.sup_norm() * c * _sphere_area(g.d) * R ** (-alpha) / alpha
    return DirectValue(float(c * total), float(tail_bound))
