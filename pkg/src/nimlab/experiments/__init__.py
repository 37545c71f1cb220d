"""Named experiment runners with machine-readable pass/fail summaries."""

from .config import ExperimentConfig, default_config, load_config, SUBCOMMANDS, ConfigError
from .runner import run, SolverFailure

__all__ = [
    "ExperimentConfig",
    "default_config",
    "load_config",
    "SUBCOMMANDS",
    "ConfigError",
    "run",
    "SolverFailure",
]
