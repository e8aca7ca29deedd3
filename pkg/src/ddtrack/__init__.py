"""Worst-case optimal finite-horizon tracking directly from input/output data.

The toolkit represents an unknown linear system by Hankel matrices of one
noise-free historical record, parameterizes every measurement noise on the
recent output window that is consistent with both a quadratic bound and the
data, and synthesizes the input minimizing the worst-case tracking cost by
solving a single semidefinite program.  An exact inner-maximization oracle
certifies that the optimized bound is attained by a feasible noise.
"""
from .behavioral import (
    HankelPartition,
    TrajectoryData,
    build_hankel,
    is_persistently_exciting,
    is_trajectory,
    partition,
    simulate_ddriven,
    stack_window,
    unstack_window,
)
from .errors import (
    ConditioningError,
    CostDefinitenessError,
    DdtrackError,
    DegenerateKernelError,
    DimensionError,
    ExperimentStageError,
    InconsistentInitialConditionError,
    InfeasibleNoiseSetError,
    PersistentExcitationError,
    SolverBackendError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    RecedingHorizonLog,
    benchmark_system,
    emit_plots,
    run_experiment,
    run_receding_horizon,
)
from .noise import (
    NoiseModel,
    NoiseParameterization,
    ReducedEllipsoid,
    build_parameterization,
    feasibility_value,
    is_feasible_gw,
    noise_from_gw,
    sample_feasible_gw,
)
from .plant import LtiSystem, generate_historical, lag, simulate
from .predictor import (
    OutputPredictor,
    TrackingProblem,
    build_Qg,
    build_predictor,
    lqte,
    predict,
    select_rows,
)
from .synthesis import (
    LmiProblem,
    SolverOptions,
    SolverStatus,
    SynthesisResult,
    assemble_lmi,
    solve,
    worst_case_cost,
)

__version__ = "0.1.0"

__all__ = [
    "HankelPartition",
    "TrajectoryData",
    "build_hankel",
    "is_persistently_exciting",
    "is_trajectory",
    "partition",
    "simulate_ddriven",
    "stack_window",
    "unstack_window",
    "LtiSystem",
    "generate_historical",
    "lag",
    "simulate",
    "NoiseModel",
    "NoiseParameterization",
    "ReducedEllipsoid",
    "build_parameterization",
    "feasibility_value",
    "is_feasible_gw",
    "noise_from_gw",
    "sample_feasible_gw",
    "OutputPredictor",
    "TrackingProblem",
    "build_Qg",
    "build_predictor",
    "lqte",
    "predict",
    "select_rows",
    "LmiProblem",
    "SolverOptions",
    "SolverStatus",
    "SynthesisResult",
    "assemble_lmi",
    "solve",
    "worst_case_cost",
    "ExperimentConfig",
    "ExperimentReport",
    "RecedingHorizonLog",
    "benchmark_system",
    "emit_plots",
    "run_experiment",
    "run_receding_horizon",
    "DdtrackError",
    "DimensionError",
    "PersistentExcitationError",
    "InconsistentInitialConditionError",
    "DegenerateKernelError",
    "InfeasibleNoiseSetError",
    "CostDefinitenessError",
    "ConditioningError",
    "SolverBackendError",
    "ExperimentStageError",
]
