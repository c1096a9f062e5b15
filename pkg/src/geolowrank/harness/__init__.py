"""Experiment harness: configs, presets, runner and command line."""
from .config import ConfigError, ExperimentConfig, load_config
from .presets import preset, preset_names
from .runner import ResultRow, read_rows_csv, run_experiment, run_indicators, write_rows_csv

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "preset", "preset_names", "ResultRow",
           "read_rows_csv", "run_experiment", "run_indicators", "write_rows_csv"]
