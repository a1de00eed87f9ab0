"""Projector-splitting integrators for dynamical low-rank approximation."""

from .kernels import (
    DimensionError,
    NonFiniteError,
    OrthogonalFlow,
    SkewSymmetryError,
    SvdResult,
    ThinFactorization,
    frobenius_norm,
    skew_orthogonal_path,
    svd,
    thin_qr,
)
from .state import (
    LowRankState,
    RankChangeReport,
    assemble,
    decrease_rank,
    increase_rank,
    load_state,
    retract,
    save_state,
    tangent_project,
    truncate_to_rank,
)
from .paths import MatrixPath, constant_path, linear_path
from .integrators import (
    FixedPointDivergedError,
    GaugedDerivative,
    IntegrationResult,
    SchemeId,
    SingularCoreError,
    gauged_rhs,
    integrate,
    kls_step,
    kls_symmetric_step,
    ksl_step,
    ksl_symmetric_step,
    midpoint_step,
    ode_ksl2_step,
    ode_ksl_step,
)
from .experiments import (
    ErrorSeries,
    OrderEstimate,
    ProblemSpec,
    SweepCell,
    estimate_order,
    generate_problem,
    run_error_series,
    runge_exponent,
    sweep_stepsizes,
)

__all__ = [
    "DimensionError",
    "NonFiniteError",
    "OrthogonalFlow",
    "SkewSymmetryError",
    "SvdResult",
    "ThinFactorization",
    "frobenius_norm",
    "skew_orthogonal_path",
    "svd",
    "thin_qr",
    "LowRankState",
    "RankChangeReport",
    "assemble",
    "decrease_rank",
    "increase_rank",
    "load_state",
    "retract",
    "save_state",
    "tangent_project",
    "truncate_to_rank",
    "MatrixPath",
    "constant_path",
    "linear_path",
    "FixedPointDivergedError",
    "GaugedDerivative",
    "IntegrationResult",
    "SchemeId",
    "SingularCoreError",
    "gauged_rhs",
    "integrate",
    "kls_step",
    "kls_symmetric_step",
    "ksl_step",
    "ksl_symmetric_step",
    "midpoint_step",
    "ode_ksl2_step",
    "ode_ksl_step",
    "ErrorSeries",
    "OrderEstimate",
    "ProblemSpec",
    "SweepCell",
    "estimate_order",
    "generate_problem",
    "run_error_series",
    "runge_exponent",
    "sweep_stepsizes",
]

__version__ = "0.1.0"
