"""Normalized matrix perturbation method for a laser-driven trapped ion."""

from .errors import (
    DimensionMismatch,
    NmpmError,
    NonPositiveNormSquared,
    NotHermitian,
    QuadratureNotConverged,
    TruncationInsufficient,
    ValidityWarning,
)
from .fock_core import DenseOperator, FockSpinState, TruncationConfig
from .ion_model import InitialStateSpec, IonParams, TimeGrid

__version__ = "0.1.0"

__all__ = [
    "DenseOperator",
    "DimensionMismatch",
    "FockSpinState",
    "InitialStateSpec",
    "IonParams",
    "NmpmError",
    "NonPositiveNormSquared",
    "NotHermitian",
    "QuadratureNotConverged",
    "TimeGrid",
    "TruncationConfig",
    "TruncationInsufficient",
    "ValidityWarning",
]
