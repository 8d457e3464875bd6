"""Numerical persistence analysis of planar limit cycles under small periodic forcing.

Pipeline: define a planar system (built-in or expression-based), locate its
limit cycle by shooting, build the linearized/adjoint eigenfunction frame,
evaluate the bifurcation integrals, compute the boundary-field degree, and
verify the predicted periodic solutions of the forced system by direct
Poincare-map computation.
"""

__version__ = "0.1.0"

from .errors import (
    CyclePersistError,
    ConfigError,
    CycleSearchError,
    DegenerateBoundaryError,
    ExpressionError,
    HypothesisFailure,
    IntegrationError,
    NonFiniteFieldError,
    NumericsError,
    PointOnBoundaryError,
)
from .expressions import ExpressionProgram, parse_expression
from .model import PlanarSystem, build_system, builtin_system, load_config
from .integrate import Trajectory, MatrixTrajectory, flow, flow_with_variational, find_event
from .cycle import LimitCycle, find_limit_cycle
from .floquet import FloquetFrame, monodromy, build_frame, longtime_adjoint_extract
from .bifurcation import (
    BifurcationProfile,
    build_profile,
    eval_f0,
    eval_f1,
    find_f0_zeros,
    check_pr1,
    check_symmetries,
)
from .degree import (
    DegreeReport,
    F_on_cycle,
    F_s_via_eta,
    winding_index,
    winding_of_samples,
    lemma5_degree,
    assess_theorem3,
)
from .persist import (
    PeriodicSolution,
    PersistenceRun,
    poincare_map,
    find_periodic_solutions,
    classify_and_phase,
    theorem1_profile,
    corollary2_check,
    run_persistence,
)

__all__ = [
    "CyclePersistError",
    "ConfigError",
    "CycleSearchError",
    "DegenerateBoundaryError",
    "ExpressionError",
    "HypothesisFailure",
    "IntegrationError",
    "NonFiniteFieldError",
    "NumericsError",
    "PointOnBoundaryError",
    "ExpressionProgram",
    "parse_expression",
    "PlanarSystem",
    "build_system",
    "builtin_system",
    "load_config",
    "Trajectory",
    "MatrixTrajectory",
    "flow",
    "flow_with_variational",
    "find_event",
    "LimitCycle",
    "find_limit_cycle",
    "FloquetFrame",
    "monodromy",
    "build_frame",
    "longtime_adjoint_extract",
    "BifurcationProfile",
    "build_profile",
    "eval_f0",
    "eval_f1",
    "find_f0_zeros",
    "check_pr1",
    "check_symmetries",
    "DegreeReport",
    "F_on_cycle",
    "F_s_via_eta",
    "winding_index",
    "winding_of_samples",
    "lemma5_degree",
    "assess_theorem3",
    "PeriodicSolution",
    "PersistenceRun",
    "poincare_map",
    "find_periodic_solutions",
    "classify_and_phase",
    "theorem1_profile",
    "corollary2_check",
    "run_persistence",
]
