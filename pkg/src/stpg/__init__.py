"""Space-time Petrov-Galerkin solver for parabolic problems with random
coefficients, with a numerical verification harness for its stability
constants, norm equivalences, quasi-optimality bounds and moment
estimates."""

from .constants import (
    ConstantsReport,
    MomentExponents,
    cfl_adjusted_infsup_bound,
    cfl_constant,
    cfl_omega,
    discrete_infsup,
    projection_stability,
    quasi_opt_ratio,
    theoretical_constants,
)
from .fem import Mesh, SpatialPair, assemble, build_mesh, dual_norm
from .oracle import (
    ModeSolution,
    exact_error,
    exact_mode_profile,
    semidiscrete_reference,
    validate_mode_profile,
)
from .solver import (
    Discretization,
    PathwiseSolveError,
    ProblemData,
    SpaceTimeSolution,
    TimeGrid,
    assemble_full_system,
    assemble_load,
    best_approximation,
    build_grams,
    energy_bound_report,
    evaluate_norm,
    forcing_dual_norm_sq,
    legendre_project,
    mode_problem,
    solve_pathwise,
    trial_energy_norm,
)
from .stochastic import (
    CoefficientModel,
    MomentEstimate,
    ParameterDomain,
    classify_trend,
    lp_norm,
    moment_exponents,
    predict_max_moment,
    predict_pbar,
    quadrature,
    singular_example_moments,
)

__version__ = "0.1.0"
