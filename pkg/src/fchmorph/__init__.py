"""Reduced-model pipeline for bilayer and filament morphologies of the
strong Functionalized Cahn-Hilliard energy: profiles, linearized spectra,
flow coefficients, stability diagrams and sphere/hoop competition."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssumptionViolation,
    ConvergenceError,
    DomainError,
    FCHError,
    SingularOperatorError,
)
from .mesh import GridSpec  # noqa: F401
from .well import WellParams, well_derivative, well_eval, well_positive_zero  # noqa: F401
