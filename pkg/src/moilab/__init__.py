"""moilab: a numerical laboratory for double and triple operator integrals,
bilinear Schur multipliers, divided differences on the unit circle, and a
finite-dimensional trace-norm remainder growth experiment."""

from . import errors
from .linalg import (
    DEFAULT_TOL,
    SpectralDecomposition,
    commutator,
    eig_hermitian,
    eig_unitary,
    exp_i,
    functional_calculus,
    schatten_norm,
)

__version__ = "0.1.0"
