"""Time integration of u_tt - Lap(u) + f(u) = 0 with conservation diagnostics.

Two time-reversible symplectic steppers are provided:

* ``verlet``: plain velocity leapfrog (the textbook kick-drift-kick form);
* ``impulse``: kick-drift-kick where the drift is the exact Fourier flow of
  the linearization at zero, i.e. frequencies sqrt(|xi|^2 + f'(0)) and kicks
  applied only to the residual f(u) - f'(0)u.

``impulse`` is the default for runs: it has no linear-part energy error at
all, so the measured O(dt^2) drift is purely attributable to the genuine
nonlinearity. Plain leapfrog carries an irreducible dt^2 omega^2 / 8 energy
oscillation on every excited mode, which drowns tight conservation budgets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field_core import (
    GridSpec,
    WaveState,
    boundary_leakage,
    gradient_norm_sq,
    l2_inner,
    l2_norm_sq,
    laplacian,
    wave_energy,
)

__all__ = [
    "WaveRunConfig",
    "WaveTrajectory",
    "DiagnosticTrace",
    "BlowUpError",
    "step",
    "run",
    "max_leakage",
    "verify_prop_weak_identity",
]

CFL_SAFETY = 0.25
LEAKAGE_LIMIT = 1e-6


class BlowUpError(RuntimeError):
    def __init__(self, t_last: float):
        super().__init__(f"non-finite state; last valid time t={t_last:.6g}")
        self.t_last = t_last


@dataclass(frozen=True)
class WaveRunConfig:
    grid: GridSpec
    spec: object
    dt: float
    T: float
    u0: np.ndarray
    u1: np.ndarray
    diagnostics_stride: int = 0  # 0: choose for ~128 snapshots
    leakage_margin: float = 0.0  # 0: L/8
    method: str = "impulse"      # "impulse" | "verlet"

    def __post_init__(self):
        limit = CFL_SAFETY * self.grid.h / np.sqrt(self.grid.d)
        if not (0.0 < self.dt <= limit * (1.0 + 1e-12)):
            raise ValueError(
                f"dt={self.dt:g} violates the stability bound "
                f"{CFL_SAFETY}*h/sqrt(d)={limit:g}"
            )
        if self.T <= 0:
            raise ValueError("T must be positive")

    def steps(self) -> int:
        return max(1, round(self.T / self.dt))

    def stride(self) -> int:
        if self.diagnostics_stride > 0:
            return self.diagnostics_stride
        return max(1, self.steps() // 128)

    def margin(self) -> float:
        return self.leakage_margin if self.leakage_margin > 0 else self.grid.L / 8.0


@dataclass
class WaveTrajectory:
    grid: GridSpec
    spec: object
    times: np.ndarray
    us: list
    uts: list

    def state(self, i: int) -> WaveState:
        return WaveState(self.grid, self.us[i], self.uts[i], float(self.times[i]))

    def __len__(self) -> int:
        return len(self.us)


@dataclass
class DiagnosticTrace:
    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, *values: float):
        self.rows.append(tuple(float(v) for v in values))

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format(v, ".17g") for v in row))
        return "\n".join(lines) + "\n"


def step(state: WaveState, cfg: WaveRunConfig) -> WaveState:
    """One velocity-leapfrog step; exactly reversible under ut -> -ut."""
    dt, grid, spec = cfg.dt, cfg.grid, cfg.spec
    ut_half = state.ut + 0.5 * dt * (laplacian(state.u, grid) - spec.f(state.u))
    u_new = state.u + dt * ut_half
    ut_new = ut_half + 0.5 * dt * (laplacian(u_new, grid) - spec.f(u_new))
    return WaveState(grid, u_new, ut_new, state.t + dt)


class _ImpulseStepper:
    """Kick-drift-kick with the linearized flow solved exactly per mode."""

    def __init__(self, cfg: WaveRunConfig):
        self.cfg = cfg
        mass = max(0.0, float(cfg.spec.fprime(0.0)))
        self.mass = mass
        om = np.sqrt(cfg.grid.wavenumber_sq() + mass)
        self.cos = np.cos(om * cfg.dt)
        self.sin_om = np.where(om > 0, np.sin(om * cfg.dt) / np.where(om > 0, om, 1.0),
                               cfg.dt)
        self.om_sin = om * np.sin(om * cfg.dt)

    def residual_force(self, u: np.ndarray) -> np.ndarray:
        return self.cfg.spec.f(u) - self.mass * u

    def __call__(self, state: WaveState) -> WaveState:
        cfg = self.cfg
        ut = state.ut - 0.5 * cfg.dt * self.residual_force(state.u)
        uh, uth = np.fft.fftn(state.u), np.fft.fftn(ut)
        u_new = np.fft.ifftn(self.cos * uh + self.sin_om * uth).real
        ut_new = np.fft.ifftn(-self.om_sin * uh + self.cos * uth).real
        ut_new -= 0.5 * cfg.dt * self.residual_force(u_new)
        return WaveState(cfg.grid, u_new, ut_new, state.t + cfg.dt)


def run(cfg: WaveRunConfig):
    """Evolve to T, recording snapshots and the conservation diagnostics."""
    if cfg.method == "impulse":
        advance = _ImpulseStepper(cfg)
    elif cfg.method == "verlet":
        def advance(s):
            return step(s, cfg)
    else:
        raise ValueError(f"unknown method {cfg.method!r}")
    state = WaveState(cfg.grid, np.asarray(cfg.u0, float), np.asarray(cfg.u1, float), 0.0)
    n, stride, margin = cfg.steps(), cfg.stride(), cfg.margin()
    times, us, uts = [], [], []
    trace = DiagnosticTrace(
        ("t", "E_total", "E_kinetic", "E_gradient", "E_potential", "leakage", "sup_norm")
    )

    def record(s: WaveState):
        times.append(s.t)
        us.append(s.u)
        uts.append(s.ut)
        rep = wave_energy(s, cfg.spec)
        leak = boundary_leakage(s.u, cfg.grid, margin)
        trace.add(s.t, rep.total, rep.kinetic, rep.gradient, rep.potential,
                  leak, np.max(np.abs(s.u)))

    record(state)
    for i in range(1, n + 1):
        state = advance(state)
        if not state.is_finite():
            raise BlowUpError(times[-1])
        if i % stride == 0 or i == n:
            record(state)
    traj = WaveTrajectory(cfg.grid, cfg.spec, np.array(times), us, uts)
    return traj, trace


def max_leakage(trace: DiagnosticTrace) -> float:
    return float(np.max(trace.column("leakage")))


def verify_prop_weak_identity(traj: WaveTrajectory, spec=None) -> float:
    """Residual of the multiplier identity for the solution itself.

    Space-time integral of |grad v|^2 - |v_t|^2 + v f(v) must equal
    B(0) - B(T) with B(t) = integral of v_t v. (The sign of the boundary
    term follows from d/dt B = |v_t|^2 - |grad v|^2 - v f(v).)
    """
    spec = spec if spec is not None else traj.spec
    grid = traj.grid
    if len(traj) < 64:
        raise ValueError("need at least 64 snapshots for the time quadrature")
    integrand = np.array(
        [
            gradient_norm_sq(u, grid) - l2_norm_sq(ut, grid)
            + l2_inner(u, spec.f(u), grid)
            for u, ut in zip(traj.us, traj.uts)
        ]
    )
    lhs = float(np.trapezoid(integrand, traj.times))
    b0 = l2_inner(traj.uts[0], traj.us[0], grid)
    bT = l2_inner(traj.uts[-1], traj.us[-1], grid)
    rhs = b0 - bT
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-300)
