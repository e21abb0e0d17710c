"""Experiment configs, pipelines, reports and the command line."""
from src.experiments.reports import SUMMARY_COLUMNS, summarize_reports, write_summary_csv
from src.experiments.runner import run_experiment, run_simulation, run_suite, run_verification
from src.experiments.schemas import ExperimentConfig, load_config, validate_config

__all__ = [
    "SUMMARY_COLUMNS",
    "summarize_reports",
    "write_summary_csv",
    "run_experiment",
    "run_simulation",
    "run_suite",
    "run_verification",
    "ExperimentConfig",
    "load_config",
    "validate_config",
]
