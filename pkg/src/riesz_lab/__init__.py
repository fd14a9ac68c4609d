"""Numerical laboratory for weighted inequalities of Schroedinger-Riesz transforms on a periodic grid."""

from .grid import Ball, Grid, GridFunction, make_grid
from .young import YoungFunction, dp_membership, luxemburg_avg
from .maximal import BallDictionary, MaximalSpec, build_dictionary, maximal_apply
from .critical import CriticalRadiusField, critical_covering, gamma0, rho_field
from .operators import assemble_classical, assemble_schrodinger, build_operator, kernel_of
from .kernels import ConditionReport, check_condition
from .inequalities import ConstantReport, InequalityTask, chi_envelope, estimate_constant, integrability_verdict

__all__ = [
    "Ball", "Grid", "GridFunction", "make_grid",
    "YoungFunction", "dp_membership", "luxemburg_avg",
    "BallDictionary", "MaximalSpec", "build_dictionary", "maximal_apply",
    "CriticalRadiusField", "critical_covering", "gamma0", "rho_field",
    "assemble_classical", "assemble_schrodinger", "build_operator", "kernel_of",
    "ConditionReport", "check_condition",
    "ConstantReport", "InequalityTask", "chi_envelope", "estimate_constant", "integrability_verdict",
]
__version__ = "0.1.0"
