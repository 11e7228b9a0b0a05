"""Exception types shared across the package."""


class MetrologyError(Exception):
    """Base class for all package errors."""


class DegenerateStateError(MetrologyError):
    """Photon subtraction annihilated the state (zero norm)."""


class NumericalConsistencyError(MetrologyError):
    """A quantity that must be real or non-negative came out otherwise."""


class RoutedToOracle(MetrologyError):
    """No closed form exists for this configuration; use the Fock oracle."""


class CutoffError(MetrologyError):
    """Fock truncation too small for the requested state."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class UndefinedSensitivityError(MetrologyError):
    """The mean quadrature is stationary in phi, so the error propagation diverges."""


class SearchError(MetrologyError):
    """Optimal-phase search found no admissible grid point."""


class SingularOptimizationError(MetrologyError):
    """Closed-form variational optimum has a vanishing denominator."""

    def __init__(self, message, scalars=None):
        super().__init__(message)
        self.scalars = scalars or {}
