"""Spectral averaging for block Jacobi matrices.

Transfer matrices, Green's matrices, Haar averages over boundary
conditions, oscillation counts and coupling-constant averaging for
self-adjoint block tridiagonal operators with invertible off-diagonal blocks.
"""
from .errors import BJSpecError, NumericalError, ValidationError
from .model import BlockJacobiModel, BoundaryPair, CouplingFamily, SemiInfiniteModel

__version__ = "0.1.0"

__all__ = ["BJSpecError", "NumericalError", "ValidationError", "BlockJacobiModel",
           "BoundaryPair", "CouplingFamily", "SemiInfiniteModel", "__version__"]
