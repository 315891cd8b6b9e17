"""Simulation and verification tools for a delayed quasispecies model with periodic coefficients."""

__version__ = "0.1.0"

from .model import (GrowthFunction, GrowthKind, ModelSpec, PeriodicSignal, ValidationReport,
                    max_delay, psi, psi_prime, validate_model)
from .dde import HistorySegment, IntegrationConfig, Trajectory, integrate, interpolate, rhs
from .averaging import (AlgebraicSolution, AveragedData, DegreeReport, check_condition_C, eval_N,
                        localization_box, residual_S, solve_S, time_average)
from .periodic import (PeriodicOrbitReport, PeriodicSearchConfig, delay_independence_sweep,
                       find_periodic, uniqueness_probe)
from .verify import Claim, VerificationCase, builtin_cases, run_suite

__all__ = [
    "GrowthFunction", "GrowthKind", "ModelSpec", "PeriodicSignal", "ValidationReport",
    "max_delay", "psi", "psi_prime", "validate_model",
    "HistorySegment", "IntegrationConfig", "Trajectory", "integrate", "interpolate", "rhs",
    "AlgebraicSolution", "AveragedData", "DegreeReport", "check_condition_C", "eval_N",
    "localization_box", "residual_S", "solve_S", "time_average",
    "PeriodicOrbitReport", "PeriodicSearchConfig", "delay_independence_sweep", "find_periodic",
    "uniqueness_probe", "Claim", "VerificationCase", "builtin_cases", "run_suite",
]
