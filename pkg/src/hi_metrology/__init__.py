"""Homodyne phase sensitivity and quantum Fisher information of a hybrid
interferometer (two-mode squeezer followed by a 50:50 beam splitter) fed by
photon-subtracted states, with a linear or Kerr phase shifter."""

from .core import InterferometerConfig, PhotonMoments, Scheme
from .errors import (
    CutoffError,
    DegenerateStateError,
    MetrologyError,
    NumericalConsistencyError,
    RoutedToOracle,
    SearchError,
    SingularOptimizationError,
    UndefinedSensitivityError,
)
from .metrology import (
    SensitivityResult,
    mu_optimal,
    optimal_phase,
    phase_sensitivity,
    qcrb,
    qfi_ideal,
    qfi_lossy_kerr,
    qfi_lossy_linear,
    quantum_limits,
)

__all__ = [
    "InterferometerConfig",
    "PhotonMoments",
    "Scheme",
    "SensitivityResult",
    "phase_sensitivity",
    "optimal_phase",
    "qfi_ideal",
    "qcrb",
    "qfi_lossy_linear",
    "qfi_lossy_kerr",
    "mu_optimal",
    "quantum_limits",
    "MetrologyError",
    "CutoffError",
    "DegenerateStateError",
    "NumericalConsistencyError",
    "RoutedToOracle",
    "SearchError",
    "SingularOptimizationError",
    "UndefinedSensitivityError",
]
