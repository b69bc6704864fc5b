"""Regularized stochastic flows: simulation, moment bounds and diagnostics.

Simulates Stratonovich stochastic differential equations through dyadic
piecewise-linear regularizations of the driving noise, supports cutoff
truncation of locally Lipschitz coefficient fields with logarithmic growth,
and verifies moment inequalities, level-uniform bounds, convergence to the
reference flow and homeomorphism diagnostics by Monte Carlo.
"""

from .fields import (
    CutoffFunction,
    FieldDomainError,
    HypothesisConstants,
    LipschitzProfile,
    VectorFieldSystem,
    check_hypothesis_H,
    corrected_drift,
    evaluate_bracket,
    profile_lipschitz,
    stratonovich_correction,
    truncate_system,
)
from .families import UnknownFamilyError, build_family, family_names
from .flow import (
    FlowGrid,
    HomeomorphismReport,
    TwoPointRecord,
    homeomorphism_report,
    near_pairs,
    simulate_flow,
    sup_process,
    two_point,
    uniform_ball_grid,
)
from .integrate import (
    SolverConfig,
    Trajectory,
    detect_explosion,
    reference_with_cross_check,
    solve_heun,
    solve_ito_corrected,
    solve_reference,
    solve_regularized,
)
from .verify import (
    BoundConstants,
    InequalityReport,
    MomentEstimate,
    alpha_n,
    bound_one_point_H1,
    bound_one_point_H2,
    bound_two_point_L,
    bound_two_point_fixed_t,
    bound_two_point_regularized,
    bound_two_point_sup,
    convergence_curve,
    estimate_moment,
    fit_holder_field,
    verify_inequality,
)
from .wiener import (
    DyadicPath,
    gamma_n,
    gaussian_abs_moment,
    interpolant_slope,
    interpolant_value,
    sample_path,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConstants",
    "CutoffFunction",
    "DyadicPath",
    "FieldDomainError",
    "FlowGrid",
    "HomeomorphismReport",
    "HypothesisConstants",
    "InequalityReport",
    "LipschitzProfile",
    "MomentEstimate",
    "SolverConfig",
    "Trajectory",
    "TwoPointRecord",
    "UnknownFamilyError",
    "VectorFieldSystem",
    "alpha_n",
    "bound_one_point_H1",
    "bound_one_point_H2",
    "bound_two_point_L",
    "bound_two_point_fixed_t",
    "bound_two_point_regularized",
    "bound_two_point_sup",
    "build_family",
    "check_hypothesis_H",
    "convergence_curve",
    "corrected_drift",
    "detect_explosion",
    "estimate_moment",
    "evaluate_bracket",
    "family_names",
    "fit_holder_field",
    "gamma_n",
    "gaussian_abs_moment",
    "homeomorphism_report",
    "interpolant_slope",
    "interpolant_value",
    "near_pairs",
    "profile_lipschitz",
    "reference_with_cross_check",
    "sample_path",
    "simulate_flow",
    "solve_heun",
    "solve_ito_corrected",
    "solve_reference",
    "solve_regularized",
    "stratonovich_correction",
    "sup_process",
    "truncate_system",
    "two_point",
    "uniform_ball_grid",
    "verify_inequality",
]
