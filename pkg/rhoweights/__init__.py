"""Weighted variable-exponent norms, critical radius functions and localized maximal operators on grids."""

from .cover import (
    BallFamily,
    OverlapReport,
    SubcriticalCovering,
    critical_covering,
    localization_dilation,
    overlap_audit,
    subcritical_covering,
)
from .errors import NumericalError, RhoWeightsError, ValidationError
from .exponent import VariableExponent, conjugate, constant_exponent, log_holder_constants, make_exponent
from .expr import parse, sample, sample_text
from .grid import Ball, Domain, GridFunction, ball_average, build_domain, integrate
from .maximal import RadiusGrid, hl_maximal, local_maximal, penalized_average, theta_maximal, theta_split
from .norm import luxemburg_norm, modular, transfer_norm, weighted_norm
from .rho import RhoConstants, RhoFunction, is_subcritical, rho_from_potential, verify_critical
from .weights import ClassReport, ap_constant, ap_local_constant, ap_theta_profile, class_report, sweep_balls

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BallFamily",
    "ClassReport",
    "Domain",
    "GridFunction",
    "NumericalError",
    "OverlapReport",
    "RadiusGrid",
    "RhoConstants",
    "RhoFunction",
    "RhoWeightsError",
    "SubcriticalCovering",
    "ValidationError",
    "VariableExponent",
    "ap_constant",
    "ap_local_constant",
    "ap_theta_profile",
    "ball_average",
    "build_domain",
    "class_report",
    "conjugate",
    "constant_exponent",
    "critical_covering",
    "hl_maximal",
    "integrate",
    "is_subcritical",
    "local_maximal",
    "localization_dilation",
    "log_holder_constants",
    "luxemburg_norm",
    "make_exponent",
    "modular",
    "overlap_audit",
    "parse",
    "penalized_average",
    "rho_from_potential",
    "sample",
    "sample_text",
    "subcritical_covering",
    "sweep_balls",
    "theta_maximal",
    "theta_split",
    "transfer_norm",
    "verify_critical",
    "weighted_norm",
]
