"""Periodic-grid fields, spectral operators, quadrature norms, and energies.

The periodic box stands in for free space: wave runs rely on unit propagation
speed to keep the support away from the boundary, NLS runs are guarded by the
boundary-leakage diagnostic instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GridSpec",
    "WaveState",
    "NlsState",
    "EnergyReport",
    "AmplitudeError",
    "laplacian",
    "l2_norm_sq",
    "l2_inner",
    "gradient_norm_sq",
    "wave_energy",
    "nls_energy",
    "boundary_leakage",
    "bump_field",
    "write_field",
    "read_field",
]


class AmplitudeError(RuntimeError):
    """Potential overflowed: field amplitude outside the safe range."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, L)^d with N points per axis."""

    d: int
    N: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two >= 8")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def axis(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    def coords(self) -> list:
        """Per-axis coordinates broadcastable to the field shape."""
        x = self.axis()
        return [
            x.reshape((1,) * i + (self.N,) + (1,) * (self.d - 1 - i))
            for i in range(self.d)
        ]

    def wavenumber_sq(self) -> np.ndarray:
        return _ksq(self.d, self.N, self.L)


@lru_cache(maxsize=32)
def _ksq(d: int, N: int, L: float) -> np.ndarray:
    k = 2.0 * np.pi / L * np.fft.fftfreq(N) * N
    ksq = np.zeros((N,) * d)
    for i in range(d):
        ksq = ksq + (k ** 2).reshape((1,) * i + (N,) + (1,) * (d - 1 - i))
    return ksq


@dataclass(frozen=True)
class WaveState:
    grid: GridSpec
    u: np.ndarray
    ut: np.ndarray
    t: float

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.ut)))


@dataclass(frozen=True)
class NlsState:
    grid: GridSpec
    u: np.ndarray
    t: float

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)))


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    gradient: float
    potential: float
    total: float
    mass: float | None = None


# ---------------------------------------------------------------------------
# spectral operators and norms
# ---------------------------------------------------------------------------

def _check(field: np.ndarray, grid: GridSpec):
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")


def laplacian(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Exact spectral Laplacian: each mode scaled by -|xi|^2."""
    _check(field, grid)
    out = np.fft.ifftn(-grid.wavenumber_sq() * np.fft.fftn(field))
    if np.isrealobj(field):
        return out.real
    return out


def l2_norm_sq(field: np.ndarray, grid: GridSpec) -> float:
    """Periodic trapezoid quadrature of |u|^2 (exact for the Riemann sum)."""
    _check(field, grid)
    return float(grid.cell_volume * np.sum(np.abs(field) ** 2))


def l2_inner(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """Real L2 pairing h^d sum Re(a conj(b))."""
    _check(a, grid)
    return float(grid.cell_volume * np.sum(np.real(a * np.conj(b))))


def gradient_norm_sq(field: np.ndarray, grid: GridSpec) -> float:
    """Parseval evaluation of the gradient norm: sum |xi|^2 |u_hat|^2."""
    _check(field, grid)
    uh = np.fft.fftn(field)
    n_total = grid.N ** grid.d
    return float(
        grid.cell_volume / n_total * np.sum(grid.wavenumber_sq() * np.abs(uh) ** 2)
    )


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------

def _potential_integral(values: np.ndarray, grid: GridSpec) -> float:
    pot = grid.cell_volume * np.sum(values)
    if not np.isfinite(pot):
        raise AmplitudeError("potential integral is not finite; reduce amplitude")
    return float(pot)


def wave_energy(state: WaveState, spec) -> EnergyReport:
    kin = 0.5 * l2_norm_sq(state.ut, state.grid)
    grad = 0.5 * gradient_norm_sq(state.u, state.grid)
    pot = _potential_integral(spec.F(state.u), state.grid)
    return EnergyReport(kin, grad, pot, kin + grad + pot)


def nls_energy(state: NlsState, spec) -> EnergyReport:
    """Mass and the conserved Hamiltonian (1/2)||grad u||^2 + int F(|u|^2/2).

    With f(u) = u F'(|u|^2/2) the gradient term carries the factor 1/2; the
    variant without it is not an invariant of the flow (checked against an
    independent RK4 integration of the collocation system).
    """
    grad = 0.5 * gradient_norm_sq(state.u, state.grid)
    pot = _potential_integral(spec.potential(state.u), state.grid)
    mass = l2_norm_sq(state.u, state.grid)
    return EnergyReport(0.0, grad, pot, grad + pot, mass=mass)


def boundary_leakage(field: np.ndarray, grid: GridSpec, margin: float) -> float:
    """Fraction of |u|^2 mass within `margin` of the box boundary.

    Data are centered at the box center, so the boundary shell is where any
    coordinate is within `margin` of 0 or L.
    """
    if not (0.0 < margin < grid.L / 2.0):
        raise ValueError("margin must lie in (0, L/2)")
    _check(field, grid)
    total = np.sum(np.abs(field) ** 2)
    if total == 0.0:
        return 0.0
    x = grid.axis()
    edge = np.minimum(x, grid.L - x) < margin
    mask = np.zeros(grid.shape, dtype=bool)
    for i in range(grid.d):
        mask |= edge.reshape((1,) * i + (grid.N,) + (1,) * (grid.d - 1 - i))
    return float(np.sum(np.abs(field[mask]) ** 2) / total)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def bump_field(
    grid: GridSpec,
    amplitude: float = 1.0,
    radius: float = 1.0,
    center: float | None = None,
) -> np.ndarray:
    """Tensor product of smooth compactly supported bumps per axis.

    Each factor is exp(1/((x/r)^2 - 1)) inside |x - c| < r and 0 outside.
    """
    if center is None:
        center = grid.L / 2.0
    out = np.full(grid.shape, amplitude)
    for xi in grid.coords():
        s = (xi - center) / radius
        with np.errstate(divide="ignore", over="ignore"):
            factor = np.where(np.abs(s) < 1.0, np.exp(1.0 / (s ** 2 - 1.0)), 0.0)
        out = out * factor
    return out


# ---------------------------------------------------------------------------
# snapshot persistence: one JSON header line, then raw little-endian float64
# ---------------------------------------------------------------------------

def write_field(path, field: np.ndarray, grid: GridSpec, t: float):
    kind = "complex" if np.iscomplexobj(field) else "real"
    header = json.dumps(
        {"d": grid.d, "N": grid.N, "L": grid.L, "t": t, "kind": kind},
        sort_keys=True,
    )
    if kind == "complex":
        flat = np.empty(2 * field.size)
        flat[0::2] = field.real.ravel()
        flat[1::2] = field.imag.ravel()
    else:
        flat = np.asarray(field, dtype=float).ravel()
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(flat.astype("<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = GridSpec(header["d"], header["N"], header["L"])
    if header["kind"] == "complex":
        field = (raw[0::2] + 1j * raw[1::2]).reshape(grid.shape)
    else:
        field = raw.reshape(grid.shape)
    return field, grid, header["t"]
