"""Experiment harness: configs, presets, the runner and the command line."""

from .config import ExperimentConfig, config_from_dict, load_config, preset
from .runner import MissingTracesError, emit_figure_data, load_manifest, run_experiment

__all__ = ["ExperimentConfig", "config_from_dict", "load_config", "preset",
           "run_experiment", "emit_figure_data", "load_manifest", "MissingTracesError"]
