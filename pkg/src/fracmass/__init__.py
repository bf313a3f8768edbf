"""Pseudospectral workbench for fractional reaction-diffusion with time-dependent coefficients.

Solves du/dt = k(t) Lap_alpha u - h(t) phi(u) on a periodic box and checks
positivity, mass bounds, persistence and comparison properties numerically.
"""

__version__ = "0.1.0"
