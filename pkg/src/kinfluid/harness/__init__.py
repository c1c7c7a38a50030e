"""Configuration, initial data, runs, sweeps and the command line."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .initial_data import entropy_discrepancy, moment_discrepancy, well_prepared_data
from .runner import (
    RunArtifact,
    RunError,
    SweepResult,
    fit_rate,
    run_single,
    run_sweep,
    strong_convergence_norms,
)

__all__ = [
    "ConfigError", "RunArtifact", "RunConfig", "RunError", "SweepResult", "fit_rate",
    "entropy_discrepancy", "moment_discrepancy", "load_config", "parse_config", "run_single",
    "run_sweep", "strong_convergence_norms", "well_prepared_data",
]
