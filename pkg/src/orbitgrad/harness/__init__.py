"""Experiment harness: configs, presets, run directories, analysis, CLI."""

from orbitgrad.harness.config import ExperimentConfig, load_config, preset, save_config
from orbitgrad.harness.runs import (
    MetricsReport,
    build_problem,
    eval_constellation,
    run_baseline_suite,
    run_experiment,
)
from orbitgrad.harness.walker import walker_generate

__all__ = [
    "ExperimentConfig",
    "MetricsReport",
    "build_problem",
    "eval_constellation",
    "load_config",
    "preset",
    "run_baseline_suite",
    "run_experiment",
    "save_config",
    "walker_generate",
]
