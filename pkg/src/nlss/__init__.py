"""Numerical toolkit for the N-coupled focusing cubic Schroedinger system on a periodic square."""
from .errors import (BlowupDetected, ConfigurationError, ConvergenceError, DomainError, MassDriftError,
                     ModeError, NLSSError, PrecisionWarning, SnapshotFormatError)
from .grid import FieldVec, Grid2D, make_grid
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FieldVec", "Grid2D", "make_grid",
    "BlowupDetected", "ConfigurationError", "ConvergenceError", "DomainError", "MassDriftError",
    "ModeError", "NLSSError", "PrecisionWarning", "SnapshotFormatError",
]
