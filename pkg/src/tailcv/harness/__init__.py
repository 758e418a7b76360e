"""Seeded experiments, verification suites and the command line interface."""

from .config import ClassConfig, ExperimentConfig
from .runner import (RateReport, TrialResult, ZTailReport, coverage_diagnostic, fit_rate,
                     rate_experiment, run_grid, run_trial, z_tail_check)
