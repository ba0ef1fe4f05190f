"""Experiment harness: grid files, generators, the Monte-Carlo driver, and
the command-line interface."""

from .experiment import (
    ExperimentPlan,
    ExperimentResult,
    plan_from_dict,
    plan_from_json,
    resolve_plan_grid,
    run_experiment,
    simulate_voltage,
    write_error_csv,
    write_gnuplot_script,
    write_trial_csv,
)
from .generate import add_open_lines, generate_random_grid, random_spanning_forest
from .gridfile import grid_to_dict, parse_grid, read_samples, write_grid, write_samples

__all__ = [
    "ExperimentPlan",
    "ExperimentResult",
    "plan_from_dict",
    "plan_from_json",
    "resolve_plan_grid",
    "run_experiment",
    "simulate_voltage",
    "write_error_csv",
    "write_gnuplot_script",
    "write_trial_csv",
    "add_open_lines",
    "generate_random_grid",
    "random_spanning_forest",
    "grid_to_dict",
    "parse_grid",
    "read_samples",
    "write_grid",
    "write_samples",
]
