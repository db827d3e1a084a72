"""Shared exception types."""

from __future__ import annotations


class MoilabError(Exception):
    """Base class for all package-specific errors."""


class DimMismatch(MoilabError):
    """Operands have incompatible shapes."""


class NotHermitian(MoilabError):
    """Input failed the Hermitian predicate at the requested tolerance."""


class NotUnitary(MoilabError):
    """Input failed the unitary predicate at the requested tolerance."""


class NoConvergence(MoilabError):
    """An underlying factorization did not converge."""


class FunctionDomainError(MoilabError):
    """A scalar function was evaluated outside its domain."""


class NotOnCircle(MoilabError):
    """A point expected on the unit circle is too far from it."""


class NotC2(MoilabError):
    """Second divided differences require a C^2 circle function."""


class SecondDerivativeSingular(MoilabError):
    """The second derivative does not exist at the requested point."""


class SolverStall(MoilabError):
    """Feasibility solver oscillated past its iteration cap.

    Kept for API completeness; the certifier reports this condition as a
    warning flag on the certificate rather than raising.
    """


class WitnessSearchFailed(MoilabError):
    """An ascent could not produce a witness meeting its contract."""


class NoAdmissibleT(MoilabError):
    """No grid point satisfied the rotation-size selection rules."""


class DegenerateCase(MoilabError):
    """A constructed pair collapsed (e.g. perturbation numerically zero)."""


class NoStabilization(MoilabError):
    """The scaling ladder ran out before the remainder terms stabilized."""


class InsufficientLadder(MoilabError):
    """Too few ladder points for the requested trend report."""
