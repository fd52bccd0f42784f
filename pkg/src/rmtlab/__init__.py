"""Numerical toolkit for non-Hermitian random matrices: ensembles, Hermitization,
the matrix Dyson equation, local eigenvalue statistics and supporting identities."""

from .ensembles import EnsembleSpec, construct_matched_pair, sample_matrix
from .hermitization import BulkPoint, ShiftParams, compute_constants
from .mde import solve_mde
from .numkernel import DimensionError, DomainError, eigenvalues, pfaffian

__version__ = "0.1.0"

__all__ = ["BulkPoint", "DimensionError", "DomainError", "EnsembleSpec", "ShiftParams",
           "compute_constants", "construct_matched_pair", "eigenvalues", "pfaffian",
           "sample_matrix", "solve_mde"]
