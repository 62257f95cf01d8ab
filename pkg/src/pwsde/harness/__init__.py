"""Experiment harness: configuration, runners, CSV output and the CLI."""

from .config import ConfigError, ExperimentConfig, build_config, read_config_file
from .experiments import (
    BenchmarkReport,
    ConvergenceReport,
    run_benchmark,
    run_check,
    run_convergence,
    run_occupation,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_config",
    "read_config_file",
    "BenchmarkReport",
    "ConvergenceReport",
    "run_benchmark",
    "run_check",
    "run_convergence",
    "run_occupation",
]
