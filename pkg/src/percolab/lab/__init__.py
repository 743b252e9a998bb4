"""Experiment runner, scaling analysis and command line."""

from .analysis import ScalingFit, WindowReport, check_window_stability, export_csv, fit_scaling
from .config import ConfigError, ExperimentConfig
from .runner import Runner, load_records, run

__all__ = ["ConfigError", "ExperimentConfig", "Runner", "ScalingFit", "WindowReport",
           "check_window_stability", "export_csv", "fit_scaling", "load_records", "run"]
