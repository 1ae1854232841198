"""Monte Carlo laboratory for BSDEs with jumps and time-delayed generators.

The package solves plain and reflected equations by backward least-squares
regression inside a Picard iteration, derives risk measures and stopping
times from reflected solutions, and evaluates robust stopping games over
finite ambiguity families.
"""

from .bsde import PicardConfig, PicardReport, SolutionTriple, backward_sweep, solve_bsde
from .config import ScenarioConfig, load_config
from .engine import (ForwardModelSpec, JumpMeasure, PathBundle, TimeGrid, build_time_grid, compensated_increment,
                     simulate_paths)
from .errors import (BSDELabError, CorruptedDataError, DivergedError, InvalidConfigError, NonContractionWarning,
                     NumericOverflowError, RegressionSingularError, UnsupportedRegimeError)
from .generators import (DelayedArgument, DelayMeasure, GeneratorSpec, check_contraction, estimate_lipschitz,
                         eval_generator, segment_view)
from .harness import RunReport, run_scenario
from .oracles import binomial_american, classical_backward_scheme
from .reflected import ObstacleSpec, ReflectedSolution, skorohod_residual, solve_reflected
from .regression import RegressionConfig, regress_conditional
from .robust import (AmbiguitySet, ComparisonRegion, GameValues, compare_solutions, comparison_region,
                     min_generator, robust_values, saddle_point)
from .stopping import (RiskReport, epsilon_optimal_time, optimal_times, risk_measure, value_function,
                       verify_optimality)
from .suite import oracle_suite
from .terminal import FirstHit, Payoff, StoppingField, TerminalSpec

__version__ = "0.1.0"

__all__ = [
    "AmbiguitySet", "BSDELabError", "ComparisonRegion", "CorruptedDataError", "DelayMeasure", "DelayedArgument",
    "DivergedError", "FirstHit", "ForwardModelSpec", "GameValues", "GeneratorSpec", "InvalidConfigError",
    "JumpMeasure", "NonContractionWarning", "NumericOverflowError", "ObstacleSpec", "PathBundle", "Payoff",
    "PicardConfig", "PicardReport", "ReflectedSolution", "RegressionConfig", "RegressionSingularError",
    "RiskReport", "RunReport", "ScenarioConfig", "SolutionTriple", "StoppingField", "TerminalSpec", "TimeGrid",
    "UnsupportedRegimeError", "backward_sweep", "binomial_american", "build_time_grid", "check_contraction",
    "classical_backward_scheme", "compare_solutions", "comparison_region", "compensated_increment",
    "epsilon_optimal_time", "estimate_lipschitz", "eval_generator", "load_config", "min_generator",
    "optimal_times", "oracle_suite", "regress_conditional", "risk_measure", "robust_values", "run_scenario",
    "saddle_point", "segment_view", "simulate_paths", "skorohod_residual", "solve_bsde", "solve_reflected",
    "value_function", "verify_optimality",
]
