"""Desk-scale numerical laboratory for supercritical semilinear wave and
Schroedinger dynamics: nonlinearity catalog, sampled inequality verification,
spectral integrators, and weak-strong Gronwall diagnostics."""

__version__ = "0.1.0"
