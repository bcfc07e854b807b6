"""Riemannian optimization on flag manifolds in Stiefel coordinates."""

from .calculus import (
    ObjectiveFunction,
    QuotientWarning,
    SingularHessianError,
    check_well_defined,
    gradient_from_partials,
    hessian_form,
    hessian_matrix,
    newton_direction,
    riemannian_gradient,
)
from .geometry import (
    DegenerateLogError,
    Geodesic,
    SeriesDivergenceError,
    SpectralForm,
    arclength,
    bracket_m,
    distance,
    exp_neg_phi,
    exp_skew,
    geodesic_evaluate,
    spectral_form,
    transport,
)
from .harness import ExperimentConfig, SweepReport, child_seed, run_property_suite, run_sweep, run_trajectory
from .objectives import (
    SymmetricMatrixProblem,
    eigenflag_objective,
    flag_distance,
    principal_flag_objective,
    principal_solution_distance,
    random_symmetric,
    trace_family_objective,
    true_principal_flag,
)
from .signature import (
    FlagError,
    FlagSignature,
    OrthogonalPoint,
    ProjectionPoint,
    ReducedProjectionPoint,
    StiefelPoint,
    complete_basis,
    dimension,
    from_orthogonal,
    from_projection,
    from_reduced,
    random_point,
    same_flag,
    to_projection,
    to_reduced,
)
from .solvers import (
    IterationRecord,
    LineSearchError,
    SolveResult,
    SolverConfig,
    conjugate_gradient,
    line_search_geodesic,
    newton_solve,
    steepest_descent,
)
from .tangent import (
    SkewGenerator,
    TangencyError,
    TangentVector,
    lift,
    metric,
    project_tangent,
    push,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateLogError",
    "ExperimentConfig",
    "FlagError",
    "FlagSignature",
    "Geodesic",
    "IterationRecord",
    "LineSearchError",
    "ObjectiveFunction",
    "OrthogonalPoint",
    "ProjectionPoint",
    "QuotientWarning",
    "ReducedProjectionPoint",
    "SeriesDivergenceError",
    "SingularHessianError",
    "SkewGenerator",
    "SolveResult",
    "SolverConfig",
    "SpectralForm",
    "StiefelPoint",
    "SweepReport",
    "SymmetricMatrixProblem",
    "TangencyError",
    "TangentVector",
    "arclength",
    "bracket_m",
    "check_well_defined",
    "child_seed",
    "complete_basis",
    "conjugate_gradient",
    "dimension",
    "distance",
    "eigenflag_objective",
    "exp_neg_phi",
    "exp_skew",
    "flag_distance",
    "from_orthogonal",
    "from_projection",
    "from_reduced",
    "geodesic_evaluate",
    "gradient_from_partials",
    "hessian_form",
    "hessian_matrix",
    "lift",
    "line_search_geodesic",
    "metric",
    "newton_direction",
    "newton_solve",
    "principal_flag_objective",
    "principal_solution_distance",
    "project_tangent",
    "push",
    "random_point",
    "random_symmetric",
    "riemannian_gradient",
    "run_property_suite",
    "run_sweep",
    "run_trajectory",
    "same_flag",
    "spectral_form",
    "steepest_descent",
    "to_projection",
    "to_reduced",
    "trace_family_objective",
    "transport",
    "true_principal_flag",
]
