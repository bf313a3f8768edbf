"""Periodic grids, sampled fields and Fourier-space helpers.

The real line (or plane) is replaced by the torus [-L, L)^d.  All transforms
are plain DFTs over that box, so convolution with a kernel given by its Fourier
multiplier is exact for the discretized operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridError",
    "Grid",
    "Field",
    "make_grid",
    "integral",
    "lp_norm",
    "forward",
    "inverse",
    "apply_multiplier",
    "convolve",
    "spectral_energy",
]

IMAG_RESIDUE_TOL = 1e-10


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^d with n points per axis."""

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"invalid dimension d={self.d}; only 1 or 2 supported")
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise GridError(f"n must be an integer, got {self.n!r}")
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise GridError(f"n must be a power of two >= 8, got {n}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"half width L must be positive, got {self.L}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.d

    @cached_property
    def axis(self) -> np.ndarray:
        """Coordinates x_j = -L + j dx along one axis."""
        x = -self.L + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of point coordinates (``indexing='ij'``)."""
        out = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        for a in out:
            a.flags.writeable = False
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers along one axis in DFT order (integer modes times pi/L)."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        k.flags.writeable = False
        return k

    @cached_property
    def freq_components(self) -> tuple[np.ndarray, ...]:
        out = np.meshgrid(*([self.wavenumbers] * self.d), indexing="ij")
        for a in out:
            a.flags.writeable = False
        return tuple(out)

    @cached_property
    def freq_norm(self) -> np.ndarray:
        """Euclidean norm of the wavevector at every DFT index."""
        r = np.sqrt(sum(k * k for k in self.freq_components))
        r.flags.writeable = False
        return r

    def center_index(self) -> tuple[int, ...]:
        """Index of the point x = 0."""
        return (self.n // 2,) * self.d

    def contains_mode(self, xi: float) -> bool:
        """True if the angular wavenumber ``xi`` lies exactly on this grid."""
        m = xi * self.L / np.pi
        return abs(m - round(m)) < 1e-12 and abs(round(m)) < self.n // 2


def make_grid(d: int, n: int, L: float) -> Grid:
    return Grid(d=d, n=n, L=L)


class Field:
    """Real samples of a function on a :class:`Grid`.

    The values array is read-only; arithmetic returns new fields.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float)
        if vals.shape != grid.shape:
            raise GridError(f"values shape {vals.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("field contains non-finite values")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample ``fn(*coords)`` on the grid."""
        return cls(grid, np.broadcast_to(fn(*grid.coords), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __rsub__(self, other):
        return Field(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values * other.values)
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def at(self, index) -> float:
        return float(self.values[index])

    def __repr__(self):
        return f"Field(grid={self.grid!r}, min={self.min():.3g}, max={self.max():.3g})"


def integral(f: Field) -> float:
    """Rectangle rule on the periodic box, exact for trigonometric polynomials."""
    return float(f.grid.cell_volume * np.sum(f.values))


def lp_norm(f: Field, p: Union[float, int] = 2) -> float:
    """Discrete L^p norm; ``p=np.inf`` gives the max norm."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if p == 1:
        return float(f.grid.cell_volume * a.sum())
    # rescale by the max so large p does not overflow
    top = a.max()
    if top == 0.0:
        return 0.0
    return float(top * (f.grid.cell_volume * np.sum((a / top) ** p)) ** (1.0 / p))


def forward(f: Field) -> np.ndarray:
    """Unnormalized DFT of the samples."""
    return sfft.fftn(f.values)


def inverse(grid: Grid, spectrum: np.ndarray, *, scale: float = 1.0) -> Field:
    """Inverse DFT returning a real field.

    Raises if the imaginary residue exceeds ``1e-10 * scale``; a large residue
    means the spectrum was not Hermitian (an asymmetric multiplier).
    """
    out = sfft.ifftn(spectrum)
    resid = float(np.max(np.abs(out.imag))) if out.size else 0.0
    if resid > IMAG_RESIDUE_TOL * max(scale, np.finfo(float).tiny):
        raise GridError(f"imaginary residue {resid:.3e} after inverse transform")
    return Field(grid, out.real)


def _check_multiplier(grid: Grid, multiplier: np.ndarray) -> np.ndarray:
    m = np.asarray(multiplier)
    if m.shape != grid.shape:
        raise GridError(f"multiplier shape {m.shape} does not match grid {grid.shape}")
    return m


def apply_multiplier(multiplier: np.ndarray, f: Field) -> Field:
    """Inverse transform of ``multiplier * DFT(f)`` with no range restriction."""
    m = _check_multiplier(f.grid, multiplier)
    scale = max(f.sup_norm(), 1.0) * max(float(np.max(np.abs(m))), 1.0)
    return inverse(f.grid, m * forward(f), scale=scale)


def convolve(multiplier: np.ndarray, f: Field) -> Field:
    """Torus convolution with the kernel whose DFT multiplier is given.

    The multiplier must be real with values in [0, 1] (a sub-Markov kernel).
    """
    m = _check_multiplier(f.grid, multiplier)
    if np.iscomplexobj(m):
        if np.max(np.abs(m.imag)) > 0:
            raise GridError("convolution multiplier must be real")
        m = m.real
    if m.min() < 0.0 or m.max() > 1.0:
        raise GridError("convolution multiplier must take values in [0, 1]")
    return inverse(f.grid, m * forward(f), scale=max(f.sup_norm(), 1.0))


def spectral_energy(f: Field) -> float:
    """Squared L^2 norm computed on the Fourier side (discrete Parseval)."""
    F = forward(f)
    return float(f.grid.cell_volume * np.sum(np.abs(F) ** 2) / f.grid.size)
