"""Pseudospectral Dirac / Klein-Gordon / nucleus simulator and diagnostics."""
from .errors import (BallViolationError, ConfigurationError, DataError, DiracKGError,
                     DivergenceError, DomainError, GateError, NumericError, RangeError,
                     UsageError)
from .grid import Grid3, ScalarField, SpinorField, apply_multiplier, make_grid, transform

__version__ = "0.1.0"

__all__ = [
    "BallViolationError", "ConfigurationError", "DataError", "DiracKGError", "DivergenceError",
    "DomainError", "GateError", "NumericError", "RangeError", "UsageError",
    "Grid3", "ScalarField", "SpinorField", "apply_multiplier", "make_grid", "transform",
]
