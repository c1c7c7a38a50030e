"""Entropy functionals, relative entropy and the inequality monitors.

Conventions: ``0 log 0 = 0``; ``1/f`` inside the Fisher-type dissipation is
floored at :data:`F_FLOOR`; spatial gradients are centered and periodic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    ModelParams,
    ViscosityModel,
    integrate_x,
    moments,
)

F_FLOOR = 1e-14
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _positive(a, name):
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)):
        raise ValueError(f"{name} must be positive")
    return a


# -- internal energy -------------------------------------------------------


def _power_difference(a, log_ratio):
    """``(exp(a * log_ratio) - 1) / a``, continuous at ``a = 0`` and free of cancellation."""
    if a == 0.0:
        return log_ratio
    return np.expm1(a * log_ratio) / a


def internal_energy_k(n, params: ModelParams):
    """``K(n) = n * integral_{n_inf}^{n} p(z) / z^2 dz`` for ``p = n^gamma``."""
    n = _positive(n, "n")
    a, ninf = params.gamma - 1.0, params.n_infty
    # (n^a - ninf^a) / a written through expm1 so gamma -> 1 stays accurate
    return n * ninf**a * _power_difference(a, np.log(n / ninf))


def internal_energy_k_prime(n, params: ModelParams):
    n = _positive(n, "n")
    a, ninf = params.gamma - 1.0, params.n_infty
    return n**a + ninf**a * _power_difference(a, np.log(n / ninf))


def h_of_n(n, params: ModelParams):
    """``H(n) = K(n) - K'(n_inf) (n - n_inf)``; nonnegative, zero at ``n_inf``."""
    ninf = params.n_infty
    return internal_energy_k(n, params) - internal_energy_k_prime(ninf, params) * (
        np.asarray(n, dtype=float) - ninf
    )


# -- relative pressures ----------------------------------------------------


def relative_pressure(x, y):
    """``P(x|y) = x log(x/y) - x + y``."""
    x = _positive(x, "x")
    y = _positive(y, "y")
    return x * np.log(x / y) - x + y


def relative_pressure_tilde(x, y, params: ModelParams):
    """Relative pressure of ``n^gamma``; reduces to :func:`relative_pressure` at gamma 1."""
    x = _positive(x, "x")
    y = _positive(y, "y")
    a = params.gamma - 1.0
    if a == 0.0:
        return relative_pressure(x, y)
    ya = y**a
    return x * ya * _power_difference(a, np.log(x / y)) - ya * (x - y)


# -- kinetic / fluid entropy -----------------------------------------------


@dataclass(frozen=True)
class EntropyReport:
    """Entropy and dissipation snapshot of a kinetic-fluid state.

    ``drag_slip`` is ``int rho |u - v|^2``, ``viscous`` is ``int nu |v_x|^2``
    and ``thermal`` is ``int int |xi - u|^2 f``; ``d2`` equals their sum.
    """

    f_total: float
    kinetic_part: float
    fluid_kinetic: float
    fluid_internal: float
    d1: float = 0.0
    d2: float = 0.0
    drag_slip: float = 0.0
    viscous: float = 0.0
    thermal: float = 0.0
    mass: float = 0.0


def _xlogx(a):
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def centered_gradient(values, dx: float) -> np.ndarray:
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def dissipation_d1(f: KineticField, params: ModelParams | None = None, u=None) -> float:
    """``sum (f_xi - (u - xi) f)^2 / max(f, F_FLOOR) dx dxi`` with centered ``f_xi``.

    ``u`` defaults to each cell's mean velocity. One-sided differences are
    used in the first and last velocity cell.
    """
    grid = f.grid
    vals = f.values
    if u is None:
        u = moments(f).u
    u = np.broadcast_to(np.asarray(u, dtype=float), (grid.nx,))
    df = np.gradient(vals, grid.dv, axis=1)
    flux = df - (u[:, None] - grid.xi[None, :]) * vals
    return float(np.sum(flux * flux / np.maximum(vals, F_FLOOR)) * grid.dx * grid.dv)


def kinetic_entropy(f: KineticField, s: FluidState, params: ModelParams,
                    with_d1: bool = True) -> EntropyReport:
    """Total entropy ``F`` with its parts and the dissipations ``D1``, ``D2``."""
    grid = f.grid
    xi = grid.xi
    vals = f.values
    dxdv = grid.dx * grid.dv
    kin = float(np.sum(_xlogx(vals) + 0.5 * xi[None, :] ** 2 * vals) * dxdv)
    v = s.v
    fl_kin = integrate_x(grid, 0.5 * s.n * v * v)
    fl_int = integrate_x(grid, h_of_n(s.n, params))

    mom = moments(f)
    u = mom.u
    slip = integrate_x(grid, mom.rho * (u - v) ** 2)
    thermal = float(np.sum((xi[None, :] - u[:, None]) ** 2 * vals) * dxdv)
    visc = integrate_x(grid, params.viscosity(s.n) * centered_gradient(v, grid.dx) ** 2)
    d2 = float(np.sum((v[:, None] - xi[None, :]) ** 2 * vals) * dxdv) + visc
    d1 = dissipation_d1(f, params, u) if with_d1 else 0.0
    return EntropyReport(
        f_total=kin + fl_kin + fl_int,
        kinetic_part=kin,
        fluid_kinetic=fl_kin,
        fluid_internal=fl_int,
        d1=d1,
        d2=d2,
        drag_slip=slip,
        viscous=visc,
        thermal=thermal,
        mass=f.mass,
    )


def kinetic_log_mass(f: KineticField) -> float:
    """``int int f (1 + |log f|)``, the quantity kept bounded on a compact domain."""
    vals = f.values
    return float(np.sum(vals + np.abs(_xlogx(vals))) * f.grid.dx * f.grid.dv)


# -- macroscopic entropy and relative entropy ------------------------------


def entropy_density(U: MixtureState, params: ModelParams) -> np.ndarray:
    return (U.m**2 / (2 * U.rho) + U.w**2 / (2 * U.n) + U.rho * np.log(U.rho)
            + h_of_n(U.n, params))


def macroscopic_entropy(U: MixtureState, params: ModelParams) -> float:
    """``sum (m^2/2rho + w^2/2n + rho log rho + H(n)) dx``."""
    return integrate_x(U.grid, entropy_density(U, params))


def entropy_gradient(U: MixtureState, params: ModelParams) -> np.ndarray:
    """Analytic ``DE(U)`` with respect to ``(rho, m, n, w)``, shape ``(4, nx)``."""
    u, v = U.u, U.v
    return np.stack([
        np.log(U.rho) + 1.0 - 0.5 * u * u,
        u,
        internal_energy_k_prime(U.n, params)
        - internal_energy_k_prime(params.n_infty, params) - 0.5 * v * v,
        v,
    ])


@dataclass(frozen=True)
class RelEntropyReport:
    kinetic_velocity_gap: float
    fluid_velocity_gap: float
    kinetic_pressure_gap: float
    fluid_pressure_gap: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total",
            self.kinetic_velocity_gap + self.fluid_velocity_gap
            + self.kinetic_pressure_gap + self.fluid_pressure_gap,
        )


def _same_grid(V, U):
    if V.grid != U.grid:
        raise ValueError("states live on different grids")


def relative_entropy_parts(V: MixtureState, U: MixtureState, params: ModelParams):
    """Cellwise densities of the four relative-entropy terms, shape ``(4, nx)``."""
    _same_grid(V, U)
    return np.stack([
        0.5 * V.rho * (U.u - V.u) ** 2,
        0.5 * V.n * (U.v - V.v) ** 2,
        relative_pressure(V.rho, U.rho),
        relative_pressure_tilde(V.n, U.n, params),
    ])


def relative_entropy_density(V: MixtureState, U: MixtureState, params: ModelParams):
    return relative_entropy_parts(V, U, params).sum(axis=0)


def relative_entropy(V: MixtureState, U: MixtureState, params: ModelParams) -> RelEntropyReport:
    """Relative entropy of candidate ``V`` with respect to reference ``U``."""
    parts = relative_entropy_parts(V, U, params)
    return RelEntropyReport(*(integrate_x(U.grid, p) for p in parts))


def relative_entropy_definitional(V: MixtureState, U: MixtureState,
                                  params: ModelParams) -> float:
    """``E(V) - E(U) - DE(U)(V - U)`` summed over cells."""
    _same_grid(V, U)
    gap = V.as_array() - U.as_array()
    dens = (entropy_density(V, params) - entropy_density(U, params)
            - np.sum(entropy_gradient(U, params) * gap, axis=0))
    return integrate_x(U.grid, dens)


def relative_flux(V: MixtureState, U: MixtureState, params: ModelParams) -> np.ndarray:
    """Per-cell size of the relative flux, ``rho'(u'-u)^2 + n'(v'-v)^2 + (gamma-1) P~(n'|n)``."""
    _same_grid(V, U)
    g = params.gamma
    out = V.rho * (V.u - U.u) ** 2 + V.n * (V.v - U.v) ** 2
    if g > 1.0:
        out = out + (g - 1.0) * relative_pressure_tilde(V.n, U.n, params)
    return out


def flux_bound_constant(gamma: float, d: int = 1) -> float:
    return max(2.0, d * (gamma - 1.0))


# -- pointwise inequality suite --------------------------------------------


@dataclass
class BoundCheck:
    name: str
    samples: int = 0
    violations: int = 0
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, ok, *columns, max_witnesses: int = 5):
        ok = np.asarray(ok, dtype=bool)
        self.samples += ok.size
        bad = np.flatnonzero(~ok)
        self.violations += bad.size
        for i in bad[: max(0, max_witnesses - len(self.witnesses))]:
            self.witnesses.append(tuple(float(np.ravel(c)[i]) for c in columns))


@dataclass
class BoundsReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list:
        return [c for c in self.checks.values() if not c.passed]


def _leq(lhs, rhs, slack=1e-12):
    return lhs <= rhs + slack * (1.0 + np.abs(rhs))


def piecewise_bound_stated(x, y, gamma, y_min, y_max):
    """Piecewise lower bound for ``P~(x|y)``: near branch for ``y/2 <= x <= 2y``."""
    near = (x >= 0.5 * y) & (x <= 2.0 * y)
    near_rhs = gamma * (2.0 * y_max) ** (gamma - 2.0) * (x - y) ** 2
    far_rhs = gamma * y_min**gamma / (4.0 * (1.0 + y_min**gamma)) * (1.0 + x**gamma)
    return near, near_rhs, far_rhs


def piecewise_near_bound_corrected(x, y, gamma, y_max):
    """Near-branch bound with the Taylor-remainder factor 1/2 kept."""
    return 0.5 * gamma * (2.0 * y_max) ** (gamma - 2.0) * (x - y) ** 2


def check_pressure_bounds(samples: int = 10_000, gammas=(1.1, 1.5, 2.0),
                          low: float = 0.1, high: float = 10.0, seed: int = 0,
                          pairs=None) -> BoundsReport:
    """Evaluate the relative-pressure lower bounds on random pairs.

    Checks the quadratic lower bounds of ``P`` and ``P~``, both branches of
    the piecewise bound (as stated, plus a corrected near branch), and the
    ``min``/``max`` identity. ``y_min`` and ``y_max`` are the ends of the
    sample range. ``pairs`` (an ``(x, y)`` tuple of arrays) replaces the
    random draw.
    """
    if pairs is None:
        rng = np.random.default_rng(seed)
        x = rng.uniform(low, high, samples)
        y = rng.uniform(low, high, samples)
    else:
        x, y = (np.atleast_1d(np.asarray(a, dtype=float)) for a in pairs)
    y_min, y_max = low, high
    checks = {name: BoundCheck(name) for name in (
        "P_lower", "minmax", "Ptilde_lower", "piecewise_near", "piecewise_far", "piecewise_near_corrected")}

    p = relative_pressure(x, y)
    checks["P_lower"].record(_leq(0.5 * np.minimum(1 / x, 1 / y) * (x - y) ** 2, p), x, y)
    lo = np.minimum(1 / x, 1 / y)
    one = lo * np.maximum(x, y)
    checks["minmax"].record(
        (np.abs(one - 1.0) <= 1e-12) & _leq(one, lo * (x + y)), x, y)

    for g in gammas:
        params = ModelParams(g, ViscosityModel.constant(1.0))
        pt = relative_pressure_tilde(x, y, params)
        gg = np.full_like(x, g)
        rhs = 0.5 * g / np.maximum(x ** (2 - g), y ** (2 - g)) * (x - y) ** 2
        checks["Ptilde_lower"].record(_leq(rhs, pt), x, y, gg)
        near, near_rhs, far_rhs = piecewise_bound_stated(x, y, g, y_min, y_max)
        checks["piecewise_near"].record(_leq(near_rhs[near], pt[near]),
                                 x[near], y[near], gg[near])
        checks["piecewise_far"].record(_leq(far_rhs[~near], pt[~near]),
                                x[~near], y[~near], gg[~near])
        corr = piecewise_near_bound_corrected(x, y, g, y_max)
        checks["piecewise_near_corrected"].record(_leq(corr[near], pt[near]),
                                           x[near], y[near], gg[near])
    return BoundsReport(checks)


# -- time-integrated entropy inequalities -----------------------------------


@dataclass(frozen=True)
class MonitorReport:
    """Outcome of the discrete entropy inequalities over a run.

    ``margin`` is right side minus left side at every sample (nonnegative
    where the inequality holds); ``first_violation`` is the first failing
    sample index or ``None``.
    """

    c_mon: float
    margin: np.ndarray
    first_violation: int | None
    modified_margin: np.ndarray
    modified_first_violation: int | None

    @property
    def holds(self) -> bool:
        return self.first_violation is None

    @property
    def modified_holds(self) -> bool:
        return self.modified_first_violation is None


def _cumtrapz(values, times):
    out = np.zeros_like(values)
    if len(values) > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def _first(bad):
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def entropy_inequality_monitor(history, params: ModelParams, dt: float,
                               c_mon: float = 1.0, times=None, d: int = 1) -> MonitorReport:
    """Check the integrated entropy inequality at every sample of ``history``.

    The main inequality is::

        F(t) + (1/eps) int D1 + int D2 <= F(0) + d * mass * t + c_mon * dt * t

    and the modified one::

        F(t) + (1/2eps) int D1 + int rho|u-v|^2 + int nu|v_x|^2
            <= F(0) + (eps/2) int int |xi-u|^2 f + c_mon * dt * t

    Time integrals use the trapezoid rule over the samples.
    """
    if not history:
        raise ValueError("empty history")
    eps = params.epsilon
    t = np.arange(len(history)) * dt if times is None else np.asarray(times, dtype=float)
    F = np.array([r.f_total for r in history])
    d1 = np.array([r.d1 for r in history])
    d2 = np.array([r.d2 for r in history])
    slip = np.array([r.drag_slip for r in history])
    visc = np.array([r.viscous for r in history])
    thermal = np.array([r.thermal for r in history])
    mass = history[0].mass
    slack = c_mon * dt * t

    lhs = F + _cumtrapz(d1, t) / eps + _cumtrapz(d2, t)
    rhs = F[0] + d * mass * t + slack
    margin = rhs - lhs
    tol = 1e-12 * (1.0 + np.abs(rhs))

    lhs_mod = F + _cumtrapz(d1, t) / (2 * eps) + _cumtrapz(slip + visc, t)
    rhs_mod = F[0] + 0.5 * eps * _cumtrapz(thermal, t) + slack
    margin_mod = rhs_mod - lhs_mod
    return MonitorReport(
        c_mon, margin, _first(margin < -tol),
        margin_mod, _first(margin_mod < -1e-12 * (1.0 + np.abs(rhs_mod))),
    )
