"""Experiment layer: config files, CSV I/O, pipelines, RMSE tables, benchmarks, CLI."""

from .config import ExperimentConfig, load_config, load_preset
from .experiment import RmseTable, replay, rmse, run_experiment

__all__ = ["ExperimentConfig", "load_config", "load_preset", "RmseTable", "replay", "rmse", "run_experiment"]
