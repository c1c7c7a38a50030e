"""Stiff kinetic-fluid solver, its two-phase hydrodynamic limit, and entropy diagnostics."""

from .errors import CFLError, SolverError, VacuumError
from .phase_space import (
    FluidState,
    KineticField,
    MixtureState,
    ModelParams,
    PhaseGrid,
    ViscosityModel,
    build_grid,
    maxwellian,
    moments,
)

__all__ = [
    "CFLError", "FluidState", "KineticField", "MixtureState", "ModelParams", "PhaseGrid",
    "SolverError", "VacuumError", "ViscosityModel", "build_grid", "maxwellian", "moments",
]
