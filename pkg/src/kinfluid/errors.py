"""Exception types raised by the solvers and diagnostics."""


class CFLError(ValueError):
    """A time step exceeds the stability limit of an explicit sub-step."""


class VacuumError(ValueError):
    """A density dropped below the vacuum guard."""


class SolverError(RuntimeError):
    """A linear or scalar solve failed or produced an inadmissible result."""
