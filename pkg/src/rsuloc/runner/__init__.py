"""Experiment orchestration: configs, seeded runs, sweeps and the CLI."""

from rsuloc.runner.config import ExperimentConfig, load_config, reference_scale_config, parse_config
from rsuloc.runner.experiment import (
    ExperimentResult,
    RunResult,
    bench,
    geometry_case,
    oracle_compare,
    run_experiment,
    simulate_run,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "RunResult",
    "bench",
    "geometry_case",
    "load_config",
    "oracle_compare",
    "reference_scale_config",
    "parse_config",
    "run_experiment",
    "simulate_run",
]
