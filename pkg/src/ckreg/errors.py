"""Exception types shared across the package.

The CLI maps these onto exit codes: argument/usage problems -> 2,
data problems -> 3, numerical failures -> 4.
"""

from __future__ import annotations


class CkregError(Exception):
    """Base class for all package errors."""


class ArgumentError(CkregError, ValueError):
    """Invalid argument value or dimension mismatch."""


class DataError(CkregError):
    """Malformed or unusable input data (CSV parsing, missing columns)."""


class DegenerateInputError(CkregError, ValueError):
    """Input that makes the requested computation undefined (n too small,
    zero variance, all-zero pilot, ...)."""


class EmptyNeighborhoodError(CkregError):
    """No kernel mass at the query point (compact kernel, far query)."""

    def __init__(self, z) -> None:
        self.z = z
        super().__init__(f"no kernel mass at z={z}")


class NonDifferentiablePointError(CkregError):
    """Derivative requested exactly at a basis-function knot."""

    def __init__(self, basis_name: str, z) -> None:
        self.basis_name = basis_name
        self.z = z
        super().__init__(f"basis {basis_name!r} is not differentiable at z={z}")


class RankDeficiencyError(CkregError):
    """A matrix that must be inverted is singular."""

    def __init__(self, message: str, null_directions=None) -> None:
        self.null_directions = null_directions
        super().__init__(message)


class EstimationImpossibleError(CkregError):
    """Every design point failed in the first stage."""


class NumericalError(CkregError):
    """Numerical failure the caller did not opt into tolerating."""
