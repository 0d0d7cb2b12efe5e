"""Distortion constants, laminates and field experiments for two-phase planar conductivities."""

from .ellipticity import K_bounds, distortion_K, ell, ellipticity_report, p_exponent
from .errors import (
    BeltramiError,
    BudgetExhausted,
    DomainError,
    Infeasible,
    InvariantViolation,
    NotElliptic,
    NotTight,
    NumericalError,
    SolverFailure,
)
from .kmin import (
    TwoPhase,
    classify_critical,
    khat,
    kmin_explicit,
    kmin_normalized,
    kmin_numeric_oracle,
    kmin_symmetric,
    simultaneous_diagonalize,
)
from .translate import gh_from_sigma, munu_to_gh, sigma_from_gh, sigma_to_munu

__version__ = "0.1.0"

__all__ = [
    "BeltramiError",
    "BudgetExhausted",
    "DomainError",
    "Infeasible",
    "InvariantViolation",
    "K_bounds",
    "NotElliptic",
    "NotTight",
    "NumericalError",
    "SolverFailure",
    "TwoPhase",
    "classify_critical",
    "distortion_K",
    "ell",
    "ellipticity_report",
    "gh_from_sigma",
    "khat",
    "kmin_explicit",
    "kmin_normalized",
    "kmin_numeric_oracle",
    "kmin_symmetric",
    "munu_to_gh",
    "p_exponent",
    "sigma_from_gh",
    "sigma_to_munu",
    "simultaneous_diagonalize",
]
