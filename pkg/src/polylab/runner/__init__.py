"""Experiment orchestration: configuration, execution, persistence and reports."""
from .config import ConfigError, ExperimentConfig, load_config, load_schema
from .experiment import RunResult, run_experiment
from .report import MissingArtifactError, emit_report

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "load_schema", "RunResult",
           "run_experiment", "MissingArtifactError", "emit_report"]
