"""Fourier-Laplace solvers for evolutionary equations and homogenization checks."""

from ._validation import ContractViolation, NumericalFailure
from .evo_solver import (SolveReport, check_autonomy, check_causality,
                         check_rho_consistency, certify_and_solve, solve)
from .homogenize import (CoefficientFamily, GConvergenceReport, MomentTable,
                         longitudinal_exact, longitudinal_experiment,
                         neumann_limit_law, orthogonal_experiment,
                         periodic_moments, static_criterion)
from .material_law import (CertificationError, LawCertificate, MaterialLaw,
                           apply_material_law, certify_accretivity,
                           check_F_membership, check_growth_class,
                           linear_growth_bound_check)
from .space_ops import (SpaceGrid, SpatialOperator, periodic_derivative,
                        resolvent_solve)
from .time_axis import (Spectrum, TimeGrid, WeightedSignal, antiderivative,
                        fourier_laplace, inverse_fourier_laplace, time_derivative,
                        time_shift, truncate_before, weighted_inner, weighted_norm)

__version__ = "0.1.0"

__all__ = [
    "ContractViolation", "NumericalFailure",
    "SolveReport", "check_autonomy", "check_causality", "check_rho_consistency",
    "certify_and_solve", "solve",
    "CoefficientFamily", "GConvergenceReport", "MomentTable", "longitudinal_exact",
    "longitudinal_experiment", "neumann_limit_law", "orthogonal_experiment",
    "periodic_moments", "static_criterion",
    "CertificationError", "LawCertificate", "MaterialLaw", "apply_material_law",
    "certify_accretivity", "check_F_membership", "check_growth_class",
    "linear_growth_bound_check",
    "SpaceGrid", "SpatialOperator", "periodic_derivative", "resolvent_solve",
    "Spectrum", "TimeGrid", "WeightedSignal", "antiderivative", "fourier_laplace",
    "inverse_fourier_laplace", "time_derivative", "time_shift", "truncate_before",
    "weighted_inner", "weighted_norm",
]
