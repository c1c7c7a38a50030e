"""Well-prepared initial data for the kinetic-fluid system and its limit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..entropy import h_of_n, relative_pressure, relative_pressure_tilde
from ..phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    ModelParams,
    PhaseGrid,
    integrate_x,
    maxwellian,
    moments,
)

RECIPES = ("maxwellian_exact", "perturbed", "equilibrium")


@dataclass(frozen=True)
class Profiles:
    """Smooth periodic limit data ``(rho0, u0, n0, v0)`` as amplitudes of one mode."""

    rho_amp: float = 0.2
    u_amp: float = 0.1
    n_amp: float = 0.2
    v_amp: float = 0.1

    def sample(self, grid: PhaseGrid, n_infty: float):
        k = 2.0 * np.pi * grid.x / grid.length
        s, c = np.sin(k), np.cos(k)
        return (1.0 + self.rho_amp * s, self.u_amp * s,
                n_infty + self.n_amp * c, -self.v_amp * s)


DEFAULT_PROFILES = Profiles()
FLAT_PROFILES = Profiles(0.0, 0.0, 0.0, 0.0)


def limit_data(grid: PhaseGrid, params: ModelParams, recipe: str = "maxwellian_exact",
               profiles: Profiles = DEFAULT_PROFILES) -> MixtureState:
    """Limit-system initial state ``U0 = (rho0, rho0 u0, n0, n0 v0)`` on ``grid``."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
    if recipe == "equilibrium":
        profiles = FLAT_PROFILES
    rho, u, n, v = profiles.sample(grid, params.n_infty)
    return MixtureState.from_primitive(grid, rho, u, n, v)


def moment_preserving_mode(grid: PhaseGrid, rho, u) -> np.ndarray:
    """Second Hermite mode ``(xi - u)^2 - 1`` made discretely orthogonal to ``1`` and ``xi``.

    The orthogonality is with respect to the sampled Maxwellian weight, so
    ``M (1 + a psi)`` has exactly the density and momentum of ``M``.
    """
    m = maxwellian(grid, rho, u).values
    xi = grid.xi
    c = xi[None, :] - np.asarray(u)[:, None]
    psi = c * c - 1.0
    # per-cell 2x2 Gram solve for the projection onto span{1, xi}
    s0 = m.sum(axis=1)
    s1 = m @ xi
    s2 = m @ (xi * xi)
    b0 = (m * psi).sum(axis=1)
    b1 = (m * psi) @ xi
    det = s0 * s2 - s1 * s1
    alpha = (b0 * s2 - b1 * s1) / det
    beta = (s0 * b1 - s1 * b0) / det
    return psi - alpha[:, None] - beta[:, None] * xi[None, :]


def well_prepared_data(recipe: str, grid: PhaseGrid, params: ModelParams,
                       amplitude: float | None = None,
                       profiles: Profiles = DEFAULT_PROFILES):
    """Initial ``(f0, fluid0, U0)`` for a recipe.

    ``maxwellian_exact`` samples the Maxwellian of the limit data;
    ``perturbed`` multiplies it by ``1 + amplitude * psi`` with ``psi`` from
    :func:`moment_preserving_mode` (default amplitude ``sqrt(eps) / 2``);
    ``equilibrium`` is the flat state ``rho = 1, u = v = 0, n = n_inf``.
    """
    U0 = limit_data(grid, params, recipe, profiles)
    f0 = maxwellian(grid, U0.rho, U0.u)
    if recipe == "perturbed":
        a = 0.5 * np.sqrt(params.epsilon) if amplitude is None else float(amplitude)
        psi = moment_preserving_mode(grid, U0.rho, U0.u)
        vals = f0.values * (1.0 + a * psi)
        if vals.min() < 0.0:
            raise ValueError(f"amplitude {a} makes the perturbed distribution negative")
        f0 = KineticField(grid, vals)
    fluid0 = FluidState(grid, U0.n, U0.w)
    return f0, fluid0, U0


def entropy_discrepancy(f0: KineticField, fluid0: FluidState, U0: MixtureState,
                   params: ModelParams) -> float:
    """Entropy gap between the kinetic-fluid data and the limit data.

    The kinetic side is ``int f (1 + log f + xi^2/2)``; the limit side is
    ``rho (1 + log rho + u^2/2)`` shifted by ``-log(2 pi)/2 rho``, the entropy
    of a unit-temperature Maxwellian, so that exact Maxwellian data gives 0.
    The far-field confinement terms are dropped on the periodic domain.
    """
    grid = f0.grid
    vals = f0.values
    logf = np.log(np.where(vals > 0, vals, 1.0))
    kin = np.sum(vals * (1.0 + logf + 0.5 * grid.xi[None, :] ** 2), axis=1) * grid.dv
    fluid = 0.5 * fluid0.n * fluid0.v ** 2 + h_of_n(fluid0.n, params)
    rho, u = U0.rho, U0.u
    ref_kin = rho * (1.0 + np.log(rho) + 0.5 * u * u) - 0.5 * np.log(2 * np.pi) * rho
    ref_fluid = 0.5 * U0.n * U0.v ** 2 + h_of_n(U0.n, params)
    return integrate_x(grid, kin + fluid - ref_kin - ref_fluid)


def moment_discrepancy(f0: KineticField, fluid0: FluidState, U0: MixtureState,
                   params: ModelParams) -> float:
    """Moment and fluid distance between the data and the limit data."""
    mom = moments(f0)
    rho_e, u_e = mom.rho, mom.u
    return integrate_x(f0.grid,
                       rho_e * (u_e - U0.u) ** 2
                       + fluid0.n * (fluid0.v - U0.v) ** 2
                       + relative_pressure(rho_e, U0.rho)
                       + relative_pressure_tilde(fluid0.n, U0.n, params))
