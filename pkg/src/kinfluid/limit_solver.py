"""Two-phase hydrodynamic limit: isothermal Euler particles plus compressible NS fluid.

The conserved state is ``U = (rho, m, n, w)`` with ``m = rho u``, ``w = n v``::

    rho_t + m_x                            = 0
    m_t   + (m u + rho)_x                  = rho (v - u)
    n_t   + w_x                            = 0
    w_t   + (w v + n^gamma)_x - 2 (nu v_x)_x = rho (u - v)

Each step is a Rusanov update of both phases, the implicit viscous solve
shared with :mod:`kinfluid.fluid_solver`, and a closed-form per-cell drag
relaxation that leaves ``m + w`` untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CFLError, VacuumError
from .fluid_solver import (
    VACUUM_GUARD,
    FluidStepConfig,
    rusanov_divergence,
    rusanov_update,
    sound_speed,
    viscous_divergence,
    viscous_step,
)
from .phase_space import FluidState, MixtureState, ModelParams, PhaseGrid

TWO_PI = 2.0 * np.pi


def _isothermal(q):
    return q


def _unit_sound(q):
    return np.ones_like(q)


def max_limit_dt(s: MixtureState, params: ModelParams, cfl: float = 0.8) -> float:
    """CFL bound over both phases; the particle phase has unit sound speed."""
    speed = max(
        float(np.max(np.abs(s.u) + 1.0)),
        float(np.max(np.abs(s.v) + sound_speed(s.n, params.gamma))),
    )
    return cfl * s.grid.dx / speed


def drag_relaxation(rho, m, n, w, dt: float, scale: float = 1.0):
    """Per-cell drag exchange with frozen coefficient ``a = dt rho (1/rho + 1/n)``.

    The slip ``u - v`` is divided by ``1 + a`` (the backward-Euler factor of
    the linear 2x2 relaxation) while the mixture velocity
    ``(m + w) / (rho + n)`` is kept. The same amount is removed from ``m``
    and added to ``w``, so ``m + w`` changes only by the last rounding.
    """
    u, v = m / rho, w / n
    slip = u - v
    a = dt * scale * rho * (1.0 / rho + 1.0 / n)
    delta = rho * n / (rho + n) * (slip - slip / (1.0 + a))
    return m - delta, w + delta


def limit_step(s: MixtureState, cfg: FluidStepConfig, params: ModelParams,
               source=None, drag_scale: float = 1.0) -> MixtureState:
    """Advance the limit system by ``cfg.dt``.

    Parameters
    ----------
    source : array of shape (4, nx), optional
        Extra right-hand side added explicitly after the convective update
        (manufactured-solution forcing).
    drag_scale : float
        Multiplies the drag coefficient; 0 decouples the phases.
    """
    dt, dx = cfg.dt, s.grid.dx
    for name, q in (("rho", s.rho), ("n", s.n)):
        if q.min() < VACUUM_GUARD:
            raise VacuumError(f"{name} = {q.min():.3e} below vacuum guard")
    gamma = params.gamma
    rho, m, c_kin = rusanov_update(s.rho, s.m, dt, dx, _isothermal, _unit_sound)
    n, w, c_fl = rusanov_update(s.n, s.w, dt, dx, params.pressure,
                                lambda q: sound_speed(q, gamma))
    courant = max(c_kin, c_fl)
    if courant > cfg.cfl * (1 + 1e-12):
        raise CFLError(f"limit CFL violated: Courant number {courant:.3f} > {cfg.cfl}")
    if source is not None:
        src = np.asarray(source, dtype=float)
        rho, m, n, w = rho + dt * src[0], m + dt * src[1], n + dt * src[2], w + dt * src[3]
    for name, q in (("rho", rho), ("n", n)):
        if q.min() < VACUUM_GUARD:
            raise VacuumError(f"{name} = {q.min():.3e} below vacuum guard")
    fl = viscous_step(FluidState(s.grid, n, w), params, dt)
    m, w = drag_relaxation(rho, m, fl.n, fl.w, dt, drag_scale)
    return MixtureState(s.grid, rho, m, fl.n, w)


def spatial_operator(s: MixtureState, params: ModelParams) -> np.ndarray:
    """Discrete ``L(U)`` with ``U_t + L(U) = 0``: flux divergence minus viscosity and drag."""
    dx = s.grid.dx
    gamma = params.gamma
    d_rho, d_m = rusanov_divergence(s.rho, s.m, dx, _isothermal, _unit_sound)
    d_n, d_w = rusanov_divergence(s.n, s.w, dx, params.pressure,
                                  lambda q: sound_speed(q, gamma))
    visc = viscous_divergence(s.v, s.n, params.viscosity, dx)
    drag = s.rho * (s.v - s.u)
    return np.stack([d_rho / dx, d_m / dx - drag, d_n / dx, d_w / dx - visc + drag])


def manufactured_residual(s: MixtureState, forcing, params: ModelParams) -> np.ndarray:
    """Per-cell residual ``forcing - L_h(U)`` of the four equations, shape ``(4, nx)``.

    ``forcing`` is the analytic spatial operator of a smooth exact solution
    sampled at the cell centers, so the residual is the consistency error of
    the discrete operator.
    """
    return np.asarray(forcing, dtype=float) - spatial_operator(s, params)


@dataclass(frozen=True)
class _Wave:
    """``mean + amp * sin(2 pi k (x - c t) + phase)`` with its derivatives."""

    mean: float
    amp: float
    phase: float = 0.0

    def eval(self, zeta, k):
        arg = TWO_PI * k * zeta + self.phase
        om = TWO_PI * k
        return (self.mean + self.amp * np.sin(arg),
                self.amp * om * np.cos(arg),
                -self.amp * om * om * np.sin(arg))


@dataclass(frozen=True)
class TravelingWave:
    """Smooth periodic exact solution translating at speed ``speed``.

    Every primitive field is a single Fourier mode of ``x - speed * t``; the
    matching source term makes it an exact solution of the forced system.
    """

    rho: _Wave = _Wave(1.0, 0.2)
    u: _Wave = _Wave(0.1, 0.1, 0.7)
    n: _Wave = _Wave(1.0, 0.2, 1.9)
    v: _Wave = _Wave(-0.1, 0.1, 3.1)
    speed: float = 0.5
    length: float = 1.0

    def _fields(self, x, t):
        zeta = np.asarray(x, dtype=float) - self.speed * t
        k = 1.0 / self.length
        return [w.eval(zeta, k) for w in (self.rho, self.u, self.n, self.v)]

    def state(self, grid: PhaseGrid, t: float) -> MixtureState:
        (rho, _, _), (u, _, _), (n, _, _), (v, _, _) = self._fields(grid.x, t)
        return MixtureState.from_primitive(grid, rho, u, n, v)

    def forcing(self, x, t: float, params: ModelParams) -> np.ndarray:
        """Analytic ``L(U)`` of the exact solution."""
        (r, rx, _), (u, ux, _), (n, nx_, _), (v, vx, vxx) = self._fields(x, t)
        g = params.gamma
        visc = params.viscosity
        m_x = rx * u + r * ux
        w_x = nx_ * v + n * vx
        mom_flux_x = rx * u * u + 2 * r * u * ux + rx
        fl_flux_x = nx_ * v * v + 2 * n * v * vx + g * n ** (g - 1) * nx_
        nu = visc(n)
        nu_x = visc.nu1 * nx_
        visc_term = 2.0 * (nu_x * vx + nu * vxx)
        drag = r * (v - u)
        return np.stack([m_x, mom_flux_x - drag, w_x, fl_flux_x - visc_term + drag])

    def time_derivative(self, x, t: float) -> np.ndarray:
        (r, rx, _), (u, ux, _), (n, nx_, _), (v, vx, _) = self._fields(x, t)
        c = self.speed
        return -c * np.stack([rx, rx * u + r * ux, nx_, nx_ * v + n * vx])

    def source(self, x, t: float, params: ModelParams) -> np.ndarray:
        """Right-hand side ``U_t + L(U)`` that the exact solution requires."""
        return self.time_derivative(x, t) + self.forcing(x, t, params)


@dataclass(frozen=True)
class ConvergenceStudy:
    nxs: tuple
    errors: tuple
    orders: tuple

    @property
    def min_order(self) -> float:
        return float(min(self.orders))


def _orders(nxs, errors):
    return tuple(
        float(np.log(errors[i] / errors[i + 1]) / np.log(nxs[i + 1] / nxs[i]))
        for i in range(len(nxs) - 1)
    )


def mms_study(params: ModelParams, nxs=(64, 128, 256), t_final: float = 0.25,
              cfl: float = 0.8, wave: TravelingWave | None = None) -> ConvergenceStudy:
    """Run the forced limit system to ``t_final`` and measure the L1 error.

    The time step shrinks with ``dx`` so the error reflects the combined
    first-order space-time accuracy.
    """
    wave = wave or TravelingWave()
    errors = []
    for nx in nxs:
        grid = PhaseGrid(int(nx), 2, wave.length, 1.0)
        s = wave.state(grid, 0.0)
        dt0 = max_limit_dt(s, params, 0.5 * cfl)
        nsteps = int(np.ceil(t_final / dt0))
        cfg = FluidStepConfig(t_final / nsteps, cfl)
        t = 0.0
        for _ in range(nsteps):
            s = limit_step(s, cfg, params, source=wave.source(grid.x, t, params))
            t += cfg.dt
        exact = wave.state(grid, t_final)
        errors.append(float(np.sum(np.abs(s.as_array() - exact.as_array())) * grid.dx))
    return ConvergenceStudy(tuple(nxs), tuple(errors), _orders(nxs, errors))


def residual_study(params: ModelParams, nxs=(64, 128, 256), t: float = 0.0,
                   wave: TravelingWave | None = None, forcing_error: float = 0.0
                   ) -> ConvergenceStudy:
    """L1 norm of :func:`manufactured_residual` under refinement.

    ``forcing_error`` adds a constant offset to every forcing component;
    a nonzero value makes the residual plateau instead of converging.
    """
    wave = wave or TravelingWave()
    errors = []
    for nx in nxs:
        grid = PhaseGrid(int(nx), 2, wave.length, 1.0)
        forcing = wave.forcing(grid.x, t, params) + forcing_error
        res = manufactured_residual(wave.state(grid, t), forcing, params)
        errors.append(float(np.sum(np.abs(res)) * grid.dx))
    return ConvergenceStudy(tuple(nxs), tuple(errors), _orders(nxs, errors))
