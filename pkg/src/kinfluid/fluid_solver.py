"""Barotropic compressible Navier-Stokes phase with density-dependent viscosity.

Split into a Rusanov finite-volume step for the Euler part, a backward-Euler
viscous step on ``v`` with ``n`` frozen, and a drag source exchanging momentum
with the particles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, SolverError, VacuumError
from .phase_space import FluidState, KineticField, ModelParams, moments

#: Hard lower bound on densities inside the explicit steps.
VACUUM_GUARD = 1e-12

_DRAG_MODES = ("explicit", "semi_implicit")


@dataclass(frozen=True)
class FluidStepConfig:
    dt: float
    cfl: float = 0.8
    drag_coupling: str = "semi_implicit"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.drag_coupling not in _DRAG_MODES:
            raise ValueError(f"drag_coupling must be one of {_DRAG_MODES}")


def sound_speed(n, gamma: float) -> np.ndarray:
    return np.sqrt(gamma * np.asarray(n, dtype=float) ** (gamma - 1.0))


def max_fluid_dt(s: FluidState, params: ModelParams, cfl: float = 0.8) -> float:
    speed = np.abs(s.v) + sound_speed(s.n, params.gamma)
    return cfl * s.grid.dx / float(speed.max())


def rusanov_update(q, mom, dt: float, dx: float, pressure, sound):
    """One periodic Rusanov (local Lax-Friedrichs) step for a 1D barotropic system.

    ``q`` is the density and ``mom`` the momentum; the physical flux is
    ``(mom, mom**2 / q + pressure(q))`` and the local wave-speed bound is
    ``|mom / q| + sound(q)``. Returns the updated pair and the largest
    Courant number ``dt * alpha / dx`` used.
    """
    vel = mom / q
    f0 = mom
    f1 = mom * vel + pressure(q)
    speed = np.abs(vel) + sound(q)
    q_r, mom_r = np.roll(q, -1), np.roll(mom, -1)
    alpha = np.maximum(speed, np.roll(speed, -1))
    # numerical flux at the right face of every cell
    flux0 = 0.5 * (f0 + np.roll(f0, -1)) - 0.5 * alpha * (q_r - q)
    flux1 = 0.5 * (f1 + np.roll(f1, -1)) - 0.5 * alpha * (mom_r - mom)
    lam = dt / dx
    q_new = q - lam * (flux0 - np.roll(flux0, 1))
    mom_new = mom - lam * (flux1 - np.roll(flux1, 1))
    return q_new, mom_new, float(lam * alpha.max())


def rusanov_divergence(q, mom, dx: float, pressure, sound):
    """Discrete ``d/dx`` of the Rusanov flux, the spatial operator of :func:`rusanov_update`."""
    q_new, mom_new, _ = rusanov_update(q, mom, dx, dx, pressure, sound)
    return q - q_new, mom - mom_new


def ns_convective_step(s: FluidState, params: ModelParams, dt: float,
                       cfl: float = 1.0) -> FluidState:
    """Rusanov step for ``(n, w)`` with flux ``(w, w^2/n + n^gamma)``."""
    if s.n.min() < VACUUM_GUARD:
        raise VacuumError(f"fluid density {s.n.min():.3e} below vacuum guard")
    gamma = params.gamma
    n, w, courant = rusanov_update(
        s.n, s.w, dt, s.grid.dx, params.pressure, lambda q: sound_speed(q, gamma)
    )
    if courant > cfl * (1 + 1e-12):
        raise CFLError(f"fluid CFL violated: Courant number {courant:.3f} > {cfl}")
    if n.min() < VACUUM_GUARD:
        raise VacuumError(f"fluid density {n.min():.3e} below vacuum guard")
    return FluidState(s.grid, n, w)


def face_viscosity(n, viscosity) -> np.ndarray:
    """Viscosity at the right face of each cell (arithmetic mean, periodic)."""
    nu = viscosity(n)
    return 0.5 * (nu + np.roll(nu, -1))


def solve_periodic_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Solve ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`` with wrap-around.

    Indices are periodic, so ``lower[0]`` and ``upper[-1]`` are the corner
    entries. Uses the Sherman-Morrison correction of a banded solve.
    """
    n = len(diag)
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if n < 3:
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] += diag[i]
            mat[i, (i - 1) % n] += lower[i]
            mat[i, (i + 1) % n] += upper[i]
        return np.linalg.solve(mat, rhs)
    corner_lo, corner_up = lower[0], upper[-1]  # A[0, n-1], A[n-1, 0]
    shift = -diag[0]
    d = diag.copy()
    d[0] -= shift
    d[-1] -= corner_up * corner_lo / shift
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = d
    ab[2, :-1] = lower[1:]
    u = np.zeros(n)
    u[0], u[-1] = shift, corner_up
    try:
        sol = solve_banded((1, 1), ab, np.column_stack([rhs, u]), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"periodic tridiagonal solve failed: {exc}") from exc
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + corner_lo / shift * y[-1]
    vz = z[0] + corner_lo / shift * z[-1]
    return y - z * (vy / (1.0 + vz))


def viscous_step(s: FluidState, params: ModelParams, dt: float) -> FluidState:
    """Backward Euler for ``d(n v)/dt = 2 d/dx(nu(n) dv/dx)`` with ``n`` frozen.

    The matrix is symmetric and the diffusion is in flux form, so the
    momentum ``sum(n v) dx`` is conserved and ``sum(n v^2)`` cannot grow.
    """
    n = s.n
    nu_face = face_viscosity(n, params.viscosity)
    k = 2.0 * dt / s.grid.dx**2
    up = -k * nu_face
    lo = -k * np.roll(nu_face, 1)
    diag = n - up - lo
    v = solve_periodic_tridiagonal(lo, diag, up, s.w)
    return FluidState(s.grid, n, n * v)


def viscous_divergence(v, n, viscosity, dx: float) -> np.ndarray:
    """Discrete ``2 d/dx(nu(n) dv/dx)`` matching :func:`viscous_step`."""
    nu_face = face_viscosity(n, viscosity)
    flux = nu_face * (np.roll(v, -1) - v) / dx
    return 2.0 * (flux - np.roll(flux, 1)) / dx


def drag_source_step(s: FluidState, rho, u, dt: float,
                     mode: str = "semi_implicit") -> FluidState:
    """Relax the fluid velocity toward the particle velocity ``u`` at rate ``rho / n``."""
    n, v = s.n, s.v
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if mode == "explicit":
        w = s.w - dt * rho * (v - u)
    elif mode == "semi_implicit":
        a = dt * rho / n
        w = n * (v + a * u) / (1.0 + a)
    else:
        raise ValueError(f"unknown drag coupling {mode!r}")
    return FluidState(s.grid, n, w)


def fluid_step(s: FluidState, f: KineticField, cfg: FluidStepConfig, params: ModelParams,
               exchange=None) -> FluidState:
    """Convective, viscous, then drag sub-steps (Lie order).

    With ``exchange`` (the per-cell momentum the particles gained during the
    same step) the fluid loses exactly that amount instead of evaluating the
    drag from the moments of ``f``; this is the matched coupling that keeps
    the mixture momentum conserved to round-off.
    """
    dt = cfg.dt
    s = ns_convective_step(s, params, dt, cfg.cfl)
    s = viscous_step(s, params, dt)
    if exchange is not None:
        return FluidState(s.grid, s.n, s.w - np.asarray(exchange))
    mom = moments(f)
    return drag_source_step(s, mom.rho, mom.u, dt, cfg.drag_coupling)
