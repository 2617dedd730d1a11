"""Optimal trade execution with an endogenous liquidation horizon.

The package solves the reduced singular boundary value problem of the
liquidation control problem by monotone time marching, evaluates the optimal
strategy and per-share price impact in market coordinates, and verifies the
results by Monte Carlo simulation and near-origin series oracles.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, InstabilityError, SolverError, ValidationError
from .model import (MarketState, ModelParams, ReducedParams, calibrate_eta,
                    check_strong_admissibility, reduce, reduction_coefficients)
from .asymptotics import (SeriesExpansion, SingularityConstants, SpecialSolution,
                          optimal_truncation, series_coefficients, series_eval,
                          singularity_constants, special_solution)
from .solution import (ImpactPoint, SolutionProfile, classify_curve, evaluate,
                       optimal_rate, price_impact, value_function)
from .pde_solver import (DiscreteOperator, SolverConfig, SpatialGrid,
                         TimeMarchState, assemble, build_grid, converge, evolve,
                         shortfall_profile, step)
from .simulate import (SimConfig, SimStats, SqrtLawFit, TransformedEstimate,
                       empirical_sqrt_fit, simulate_liquidation,
                       simulate_transformed)

__all__ = [
    "__version__",
    "ConvergenceError", "InstabilityError", "SolverError", "ValidationError",
    "MarketState", "ModelParams", "ReducedParams", "calibrate_eta",
    "check_strong_admissibility", "reduce", "reduction_coefficients",
    "SeriesExpansion", "SingularityConstants", "SpecialSolution",
    "optimal_truncation", "series_coefficients", "series_eval",
    "singularity_constants", "special_solution",
    "ImpactPoint", "SolutionProfile", "classify_curve", "evaluate",
    "optimal_rate", "price_impact", "value_function",
    "DiscreteOperator", "SolverConfig", "SpatialGrid", "TimeMarchState",
    "assemble", "build_grid", "converge", "evolve", "shortfall_profile", "step",
    "SimConfig", "SimStats", "SqrtLawFit", "TransformedEstimate",
    "empirical_sqrt_fit", "simulate_liquidation", "simulate_transformed",
]
