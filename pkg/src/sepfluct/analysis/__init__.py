"""Ensemble statistics, exact oracles and check suites."""

from .ensemble import EnsembleData, simulate_ensemble
from .experiment import ExperimentResult, run_ensemble
from .oracles import (
    BruteForceModel, OracleError, brute_force_expectation, covariance_oracle_finite, covariance_oracle_limit,
    gamma_variance_exact,
)
from .checks import martingale_test
from .stats import Check, EnsembleStats

__all__ = [
    "EnsembleData", "simulate_ensemble", "ExperimentResult", "run_ensemble",
    "BruteForceModel", "OracleError", "brute_force_expectation", "covariance_oracle_finite",
    "covariance_oracle_limit", "gamma_variance_exact", "martingale_test", "Check", "EnsembleStats",
]
