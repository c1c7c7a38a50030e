"""Split-step solver for the stiff Vlasov-Fokker-Planck equation in 1D x 1V.

One step composes

* free transport ``xi df/dx`` (first-order upwind, periodic in x),
* the O(1) drag ``d/dxi((v - xi) f)`` toward the fluid velocity (upwind in
  xi, zero flux at ``+-vmax``),
* the stiff relaxation ``(1/eps) d/dxi(df/dxi - (u - xi) f)`` (implicit).

The implicit relaxation freezes ``u`` at the cell's mean velocity and uses a
flux of the equilibrium-weighted form ``J = W (g_{j+1} - g_j) / dv`` with
``g = f / M``. Any positive face weight ``W`` makes the sampled Gaussian an
exact steady state and gives an M-matrix; here ``W`` is the discrete
antiderivative of ``(u - xi) M`` so that the discrete momentum obeys the same
closed relaxation law as the continuous one. Combined with a solve for the
deviation from equilibrium this keeps mass and momentum per cell to round-off
for any ``dt / eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, SolverError
from .phase_space import FluidState, KineticField, ModelParams, moments

_SPLITTINGS = ("strang", "lie")


@dataclass(frozen=True)
class KineticStepConfig:
    """Time step and sub-step options for :func:`kinetic_step`.

    ``fp_substeps`` backward-Euler solves of length ``dt / fp_substeps`` make
    up one relaxation step; ``fp_solver_tol`` is the tolerance on the
    equilibrium-center iteration.
    """

    dt: float
    cfl_transport: float = 0.9
    fp_solver_tol: float = 1e-12
    splitting: str = "strang"
    fp_substeps: int = 2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_transport <= 1:
            raise ValueError("cfl_transport must lie in (0, 1]")
        if self.splitting.lower() not in _SPLITTINGS:
            raise ValueError(f"splitting must be one of {_SPLITTINGS}")
        if self.fp_substeps < 1:
            raise ValueError("fp_substeps must be at least 1")


def max_kinetic_dt(grid, v, cfl: float = 0.9) -> float:
    """Largest ``dt`` satisfying both the transport and the drag CFL bounds."""
    drift = float(np.max(np.abs(v))) + grid.vmax
    return cfl * min(grid.dx / grid.vmax, grid.dv / drift)


def check_kinetic_cfl(grid, v, dt: float, cfl: float) -> None:
    if dt > cfl * grid.dx / grid.vmax * (1 + 1e-12):
        raise CFLError(f"transport CFL violated: dt={dt:.3e} > {cfl} dx/vmax")
    drift = float(np.max(np.abs(v))) + grid.vmax
    if dt > cfl * grid.dv / drift * (1 + 1e-12):
        raise CFLError(f"drag CFL violated: dt={dt:.3e} > {cfl} dv/max|v - xi|")


def transport_step_x(f: KineticField, dt: float, cfl: float = 1.0) -> KineticField:
    """Upwind update of ``df/dt + xi df/dx = 0``, one column per velocity."""
    grid = f.grid
    xi = grid.xi
    if dt * np.max(np.abs(xi)) > cfl * grid.dx * (1 + 1e-12):
        raise CFLError(f"transport CFL violated: dt={dt:.3e}")
    vals = f.values
    # flux through the right face of each cell
    flux = np.maximum(xi, 0.0) * vals + np.minimum(xi, 0.0) * np.roll(vals, -1, axis=0)
    new = vals - (dt / grid.dx) * (flux - np.roll(flux, 1, axis=0))
    return KineticField(grid, new)


def _drag_flux(vals, v, faces):
    a = v[:, None] - faces[None, :]
    return np.maximum(a, 0.0) * vals[:, :-1] + np.minimum(a, 0.0) * vals[:, 1:]


def drag_step(f: KineticField, v, dt: float, cfl: float = 1.0) -> KineticField:
    """Upwind update of ``df/dt + d/dxi((v - xi) f) = 0`` with zero flux at ``+-vmax``."""
    grid = f.grid
    v = np.broadcast_to(np.asarray(v, dtype=float), (grid.nx,))
    drift = float(np.max(np.abs(v))) + grid.vmax
    if dt * drift > cfl * grid.dv * (1 + 1e-12):
        raise CFLError(f"drag CFL violated: dt={dt:.3e}")
    vals = f.values
    flux = np.zeros((grid.nx, grid.nv + 1))
    flux[:, 1:-1] = _drag_flux(vals, v, grid.xi_faces)
    new = vals - (dt / grid.dv) * np.diff(flux, axis=1)
    return KineticField(grid, new)


def _equilibrium(xi, dv, target, tol, maxiter=50):
    """Discrete Gaussians with unit mass whose discrete mean equals ``target``.

    The midpoint mean of ``exp(-(xi - c)^2 / 2)`` differs from ``c`` by the
    velocity truncation; Newton on ``c`` removes that gap so the relaxation
    conserves momentum exactly on any grid.
    """
    c = np.array(target, dtype=float)
    scale = 1.0 + np.abs(target)
    for _ in range(maxiter):
        d = xi[None, :] - c[:, None]
        w = np.exp(-0.5 * d * d)
        s0 = w.sum(axis=1)
        mean = (w @ xi) / s0
        resid = target - mean
        if np.all(np.abs(resid) <= tol * scale):
            break
        var = (w * (xi[None, :] - mean[:, None]) ** 2).sum(axis=1) / s0
        if np.any(var <= 0.0):
            raise SolverError("degenerate velocity grid for the equilibrium center")
        c = c + resid / var
    else:
        raise SolverError("equilibrium center iteration did not converge")
    if np.any(w.min(axis=1) <= 0.0):
        raise SolverError("equilibrium underflows on this velocity box; reduce vmax")
    m_hat = w / (s0[:, None] * dv)
    return m_hat, mean


def _face_weights(xi, dv, m_hat, mean):
    """Positive face weights with ``(W_{j-1/2} - W_{j+1/2}) / dv = (xi_j - mean) M_j``."""
    drift = (mean[:, None] - xi[None, :]) * m_hat
    left = dv * np.cumsum(drift, axis=1)[:, :-1]
    right = -dv * np.cumsum(drift[:, ::-1], axis=1)[:, ::-1][:, 1:]
    faces = 0.5 * (xi[1:] + xi[:-1])
    # partial sums taken from the side where every term is positive
    return np.where(faces[None, :] <= mean[:, None], left, right)


def _relaxation_bands(grid, m_hat, weights, h):
    nx, nv, dv = grid.nx, grid.nv, grid.dv
    k = h / (dv * dv)
    upper = np.zeros((nx, nv))  # coupling (j, j+1)
    lower = np.zeros((nx, nv))  # coupling (j, j-1)
    upper[:, :-1] = -k * weights / m_hat[:, 1:]
    lower[:, 1:] = -k * weights / m_hat[:, :-1]
    wsum = np.zeros((nx, nv))
    wsum[:, :-1] += weights
    wsum[:, 1:] += weights
    diag = 1.0 + k * wsum / m_hat
    ab = np.zeros((3, nx * nv))
    ab[0, 1:] = upper.ravel()[:-1]
    ab[1] = diag.ravel()
    ab[2, :-1] = lower.ravel()[1:]
    return ab


def fokker_planck_step(f: KineticField, dt: float, epsilon: float, u=None,
                       substeps: int = 2, tol: float = 1e-12) -> KineticField:
    """Implicit relaxation step for ``df/dt = (1/eps) d/dxi(df/dxi - (u - xi) f)``.

    ``u`` defaults to the mean velocity of ``f`` in each cell, which the
    continuous operator leaves invariant; passing ``u`` freezes a different
    drift center. The step is ``substeps`` backward-Euler solves of length
    ``dt / substeps`` sharing one banded matrix over all cells.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = f.grid
    xi, dv = grid.xi, grid.dv
    mom = moments(f)
    rho = mom.rho
    target = mom.u if u is None else np.broadcast_to(np.asarray(u, dtype=float), (grid.nx,))
    m_hat, mean = _equilibrium(xi, dv, target, tol)
    weights = _face_weights(xi, dv, m_hat, mean)
    ab = _relaxation_bands(grid, m_hat, weights, dt / (epsilon * substeps))

    eq = rho[:, None] * m_hat
    dev = (f.values - eq).ravel()
    try:
        for _ in range(substeps):
            dev = solve_banded((1, 1), ab, dev, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"relaxation solve failed: {exc}") from exc
    new = eq + dev.reshape(grid.nx, grid.nv)
    if not np.all(np.isfinite(new)):
        raise SolverError("relaxation solve produced non-finite values")
    # the exact solution is nonnegative (M-matrix); only round-off may dip below zero
    floor = -1e-12 * max(float(np.abs(f.values).max(initial=0.0)), 1e-300)
    if new.min(initial=0.0) < floor:
        raise SolverError(f"relaxation produced a negative value {new.min():.3e}")
    return KineticField(grid, np.maximum(new, 0.0))


def kinetic_step_with_exchange(f: KineticField, fluid: FluidState, cfg: KineticStepConfig,
                               params: ModelParams) -> tuple[KineticField, np.ndarray]:
    """Advance ``f`` by ``cfg.dt`` and report the momentum it gained from drag per cell.

    The returned exchange is what the fluid must lose for the mixture
    momentum to be conserved exactly.
    """
    grid = f.grid
    dt = cfg.dt
    v = fluid.v
    check_kinetic_cfl(grid, v, dt, cfg.cfl_transport)

    def drag(g, tau):
        before = moments(g).momentum
        g = drag_step(g, v, tau)
        return g, moments(g).momentum - before

    def relax(g, tau):
        return fokker_planck_step(g, tau, params.epsilon, substeps=cfg.fp_substeps,
                                  tol=cfg.fp_solver_tol)

    if cfg.splitting.lower() == "strang":
        f = transport_step_x(f, 0.5 * dt)
        f, ex1 = drag(f, 0.5 * dt)
        f = relax(f, dt)
        f, ex2 = drag(f, 0.5 * dt)
        f = transport_step_x(f, 0.5 * dt)
        exchange = ex1 + ex2
    else:
        f = transport_step_x(f, dt)
        f, exchange = drag(f, dt)
        f = relax(f, dt)
    return f, exchange


def kinetic_step(f: KineticField, fluid: FluidState, cfg: KineticStepConfig,
                 params: ModelParams) -> KineticField:
    """One split step of the full kinetic equation; see :func:`kinetic_step_with_exchange`."""
    return kinetic_step_with_exchange(f, fluid, cfg, params)[0]
