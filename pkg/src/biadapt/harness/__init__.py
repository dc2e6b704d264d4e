"""Configuration, experiment stages, report and command-line entry point."""

from .config import DEFAULT_CONFIG, METHODS, SPLITS, ExperimentConfig, format_config, load_config, parse_config
from .pipeline import run_gen, run_matrix, run_train
from .report import format_table, parse_rows, run_report

__all__ = [
    "DEFAULT_CONFIG", "METHODS", "SPLITS", "ExperimentConfig", "format_config", "load_config", "parse_config",
    "run_gen", "run_matrix", "run_train", "format_table", "parse_rows", "run_report",
]
