"""Phase sensitivity, optimal working point, quantum Fisher information and
the lossy variational bound.

Sensitivity is the error-propagation estimate ``sqrt(Var X) / |d<X>/dphi|``
for homodyne detection of ``X_a = (a + a^dag)/sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import core, oracle
from .core import InterferometerConfig, PhotonMoments, Scheme
from .errors import (
    DegenerateStateError,
    NumericalConsistencyError,
    SearchError,
    SingularOptimizationError,
    UndefinedSensitivityError,
)

__all__ = [
    "SensitivityResult",
    "LossyQfiCoefficients",
    "phase_sensitivity",
    "optimal_phase",
    "default_window",
    "qfi_ideal",
    "qcrb",
    "qfi_lossy_linear",
    "lossy_kerr_fisher",
    "mu_optimal",
    "qfi_lossy_kerr",
    "quantum_limits",
    "richardson_slope",
]

SLOPE_TOL = 1e-12
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SensitivityResult:
    phi: float
    delta_phi: float
    mean_x: float
    var_x: float
    slope: float
    source: str  # "generating-function" or "oracle"


# --------------------------------------------------------------------------
# Homodyne sensitivity
# --------------------------------------------------------------------------


def richardson_slope(f: Callable[[float], float], phi: float, h: float | None = None) -> float:
    """Central difference at steps ``h`` and ``h/2`` combined to cancel the h^2 error."""
    h = 1e-6 * max(1.0, abs(phi)) if h is None else h

    def central(step):
        return (f(phi + step) - f(phi - step)) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


_CUTOFF_OVERRIDE: int | None = None


def set_oracle_cutoff(cutoff: int | None) -> None:
    """Fix the oracle truncation used for lossy Kerr moments; ``None`` converges it automatically."""
    global _CUTOFF_OVERRIDE
    if cutoff is not None and cutoff < 1:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    _CUTOFF_OVERRIDE = cutoff
    _oracle_session.cache_clear()


@lru_cache(maxsize=64)
def _oracle_cutoff(cfg: InterferometerConfig) -> int:
    # loss only removes photons, so the lossless state sets the truncation
    return oracle.converged_cutoff(cfg.replace(eta=1.0))[0]


@lru_cache(maxsize=16)
def _oracle_session(cfg: InterferometerConfig) -> oracle.OracleSession:
    key = cfg.replace(phi=0.0)
    return oracle.OracleSession(key, _CUTOFF_OVERRIDE or _oracle_cutoff(key))


def _moment_source(cfg: InterferometerConfig, kerr_b_sign: int):
    """Return ``(f(phi) -> (<X>, <X^2>), source_name)``."""
    if cfg.scheme is Scheme.KERR and not cfg.lossless:
        session = _oracle_session(cfg)
        return (lambda phi: session.homodyne(phi, method="heisenberg")), "oracle"
    return (lambda phi: core.homodyne_moments(cfg, phi, kerr_b_sign=kerr_b_sign)), "generating-function"


def phase_sensitivity(
    cfg: InterferometerConfig,
    phi: float | None = None,
    *,
    kerr_b_sign: int = -1,
    richardson: bool = True,
) -> SensitivityResult:
    """Homodyne phase sensitivity at ``phi`` (default ``cfg.phi``).

    The linear scheme uses the analytic slope; the Kerr scheme uses a
    Richardson-extrapolated central difference (a single central difference
    with ``richardson=False``, used for coarse scans).  Lossy Kerr
    configurations are evaluated with the Fock oracle.
    """
    phi = cfg.phi if phi is None else float(phi)
    moments, source = _moment_source(cfg, kerr_b_sign)
    mean, second = moments(phi)
    if cfg.scheme is Scheme.LINEAR:
        slope = core.linear_mean_slope(cfg, phi)
    else:
        f = lambda p: moments(p)[0]  # noqa: E731
        if richardson:
            slope = richardson_slope(f, phi)
        else:
            h = 1e-6 * max(1.0, abs(phi))
            slope = (f(phi + h) - f(phi - h)) / (2 * h)
    var = second - mean**2
    if var < 0:
        if var < -1e-9 * max(1.0, second):
            raise NumericalConsistencyError(f"negative quadrature variance {var:.3e} at phi={phi}")
        var = 0.0
    if not abs(slope) > SLOPE_TOL:
        raise UndefinedSensitivityError(f"d<X>/dphi = {slope:.3e} vanishes at phi={phi}")
    return SensitivityResult(phi, math.sqrt(var) / abs(slope), mean, var, slope, source)


def default_window(scheme: Scheme) -> tuple[float, float]:
    if scheme is Scheme.LINEAR:
        return 0.05, math.pi - 0.05
    return 1e-4, 0.5


def optimal_phase(
    cfg: InterferometerConfig,
    window: tuple[float, float] | None = None,
    grid_points: int = 256,
    *,
    rtol: float = 1e-10,
    kerr_b_sign: int = -1,
) -> SensitivityResult:
    """Minimize the sensitivity over ``window``: grid scan, then golden section
    around the best grid point (the lowest phi wins ties)."""
    lo, hi = default_window(cfg.scheme) if window is None else window
    if not hi > lo:
        raise ValueError(f"empty search window ({lo}, {hi})")
    if grid_points < 16:
        raise ValueError("grid_points must be at least 16")

    def dphi(p, richardson=True):
        try:
            return phase_sensitivity(cfg, p, kerr_b_sign=kerr_b_sign, richardson=richardson).delta_phi
        except (UndefinedSensitivityError, DegenerateStateError):
            return math.inf

    grid = np.linspace(lo, hi, grid_points)
    values = np.array([dphi(p, richardson=False) for p in grid])
    if not np.isfinite(values).any():
        raise SearchError(f"no admissible phase in ({lo}, {hi})")
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = dphi(c), dphi(d)
    best = min(fc, fd)
    for _ in range(200):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = dphi(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = dphi(d)
        new = min(fc, fd)
        done = abs(best - new) <= rtol * new and (b - a) < 1e-8 * max(1.0, abs(a))
        best = new
        if done:
            break
    phi_star = c if fc <= fd else d
    result = phase_sensitivity(cfg, phi_star, kerr_b_sign=kerr_b_sign)
    if values[i] < result.delta_phi:
        result = phase_sensitivity(cfg, grid[i], kerr_b_sign=kerr_b_sign)
    return result


# --------------------------------------------------------------------------
# Quantum Fisher information
# --------------------------------------------------------------------------


def _ideal_moments(cfg: InterferometerConfig) -> PhotonMoments:
    return core.photon_moments(cfg.replace(eta=1.0))


def qfi_ideal(cfg: InterferometerConfig) -> tuple[float, float | None]:
    """``(F, f_surplus)``: ``F1 = 4 Var(n)`` or ``F2 = 4 Var(n^2)``; the surplus
    ``F2 - F1`` is reported for the Kerr scheme only."""
    mom = _ideal_moments(cfg)
    f1 = 4 * mom.var_n
    if cfg.scheme is Scheme.LINEAR:
        return f1, None
    f2 = 4 * mom.var_n2
    return f2, f2 - f1


def qcrb(F: float) -> float:
    if not F > 0:
        raise ValueError(f"QCRB needs positive Fisher information, got {F}")
    return 1.0 / math.sqrt(F)


def qfi_lossy_linear(cfg: InterferometerConfig) -> float:
    """``4 F1 eta <n> / ((1 - eta) F1 + 4 eta <n>)`` with pre-loss moments."""
    if cfg.scheme is not Scheme.LINEAR:
        raise ValueError("qfi_lossy_linear applies to the linear scheme")
    if cfg.eta == 1:
        return qfi_ideal(cfg)[0]
    mom = _ideal_moments(cfg)
    f1 = 4 * mom.var_n
    den = (1 - cfg.eta) * f1 + 4 * cfg.eta * mom.n1
    if den == 0:
        raise DegenerateStateError("vacuum input: lossy Fisher information undefined")
    return 4 * f1 * cfg.eta * mom.n1 / den


@dataclass(frozen=True)
class LossyQfiCoefficients:
    mu1: float
    mu2: float
    c: tuple[float, ...]  # c1..c7
    cap_c: tuple[float, ...]  # C1..C6
    a_aux: tuple[float, ...]  # a1..a4
    b_rows: tuple[tuple[float, ...], ...]  # b1..b5
    h: tuple[float, ...]
    a: float
    b: float
    c_scalar: float
    d: float
    e: float
    hessian: tuple[tuple[float, float], tuple[float, float]]

    @property
    def hessian_signature(self) -> str:
        """``maximum``, ``minimum``, ``saddle`` or ``degenerate`` (diagnostic only)."""
        ev = np.linalg.eigvalsh(np.array(self.hessian))
        scale = max(abs(ev).max(), 1e-300)
        if ev.max() < -1e-12 * scale:
            return "maximum"
        if ev.min() > 1e-12 * scale:
            return "minimum"
        if ev.min() < -1e-12 * scale and ev.max() > 1e-12 * scale:
            return "saddle"
        return "degenerate"


def _small_c(mu1: float, mu2: float) -> tuple[float, ...]:
    c1 = 1 + 2 * mu1 - mu2
    c2 = mu1 - mu2
    c3 = 1 + 2 * (3 * mu1 - 2 * mu2) + (2 * mu1 - mu2) * (4 * mu1 - 3 * mu2)
    c4 = 7 * mu2 - 6 * mu1 + 24 * mu1 * mu2 - 14 * mu1**2 - 9 * mu2**2
    c5 = mu2 * c1 - 2 * c2**2
    c6 = 9 + 40 * mu1 - 22 * mu2 + 44 * mu1**2 - 48 * mu1 * mu2 + 13 * mu2**2
    c7 = 7 + 40 * mu1 - 26 * mu2 + 52 * mu1**2 - 64 * mu1 * mu2 + 19 * mu2**2
    return c1, c2, c3, c4, c5, c6, c7


def _big_c(mu1: float, mu2: float, eta: float) -> tuple[float, ...]:
    c1, c2, c3, c4, c5, c6, c7 = _small_c(mu1, mu2)
    C1 = c1 * eta**2 - 2 * c2 * eta - mu2
    C2 = 2 * eta * (3 * c1**2 * eta**3 - 3 * c3 * eta**2 - c4 * eta + c5)
    C3 = eta * (11 * c1**2 * eta**3 - 2 * c6 * eta**2 + c7 * eta - 4 * c1 * c2)
    C4 = eta * (6 * eta**3 - 12 * eta**2 + 7 * eta - 1) * c1**2
    C5 = 2 * eta * (1 - eta) * c1 * C1
    C6 = eta**2 * (1 - eta) ** 2 * c1**2
    return C1, C2, C3, C4, C5, C6


def lossy_kerr_fisher(moments: PhotonMoments, eta: float, mu1: float, mu2: float) -> float:
    """Variational lossy Fisher information at ``(mu1, mu2)``."""
    C1, C2, C3, C4, C5, C6 = _big_c(mu1, mu2, eta)
    n1, n2, n3 = moments.n1, moments.n2, moments.n3
    return 4 * (C1**2 * moments.var_n2 - C2 * n3 + C3 * n2 - C4 * n1 - C5 * n2 * n1 - C6 * n1**2)


def _moment_vector(moments: PhotonMoments) -> np.ndarray:
    n1, n2, n3 = moments.n1, moments.n2, moments.n3
    return np.array([moments.var_n2, n3, n2, n1, n2 * n1, n1**2])


def _b_rows(eta: float) -> tuple[tuple[float, ...], np.ndarray]:
    a1 = eta - 1
    a2 = 6 * eta**2 - 6 * eta + 1
    a3 = 11 * eta**2 - 11 * eta + 2
    a4 = 2 * eta - 1
    rows = np.array(
        [
            [eta * a1, -a2, a3, -a2, 2 * eta * a1, -eta * a1],
            [a1**2, -3 * a1 * a4, a3 - a4, -a2, a1 * a4, -eta * a1],
            [eta**2, -3 * eta * a4, a3 + a4, -a2, eta * a4, -eta * a1],
            [a1**3, -6 * eta * a1**2, eta * (a3 - 2 * a4), -eta * a2, 2 * eta * a1**2, -(eta**2) * a1],
            [eta * a1, -a2, a3, -a2, eta**2 + a1**2, -eta * a1],
        ]
    )
    return (a1, a2, a3, a4), rows


def _hessian(eta: float, a: float, b: float, d: float) -> tuple[tuple[float, float], tuple[float, float]]:
    # the bound is quadratic in (mu1, mu2); its Hessian is the stationarity
    # system itself and vanishes identically without loss
    k = 8 * (1 - eta)
    return (-2 * eta * k * a, 2 * eta * k * b), (2 * eta * k * b, -k * d)


def mu_optimal(moments: PhotonMoments, eta: float) -> tuple[float, float, LossyQfiCoefficients]:
    """Closed-form stationary point ``(mu1, mu2)`` of the lossy Kerr bound."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    aux, rows = _b_rows(eta)
    H = _moment_vector(moments)
    bH = rows @ H
    a, b, c, d, e = 2 * bH[0], bH[1], bH[2], bH[3], eta * bH[4]
    den = a * d - 2 * eta * b**2
    scalars = {"a": a, "b": b, "c": c, "d": d, "e": e, "denominator": den}
    scale = abs(a * d) + 2 * eta * b**2
    if scale == 0 or abs(den) <= 1e-12 * scale:
        raise SingularOptimizationError("variational optimum is singular (ad - 2 eta b^2 = 0)", scalars)
    mu1 = (b * e - c * d) / den
    mu2 = (a * e - 2 * eta * b * c) / den
    coeffs = LossyQfiCoefficients(
        mu1=mu1,
        mu2=mu2,
        c=_small_c(mu1, mu2),
        cap_c=_big_c(mu1, mu2, eta),
        a_aux=aux,
        b_rows=tuple(tuple(float(x) for x in r) for r in rows),
        h=tuple(float(x) for x in H),
        a=a,
        b=b,
        c_scalar=c,
        d=d,
        e=e,
        hessian=_hessian(eta, a, b, d),
    )
    return mu1, mu2, coeffs


def qfi_lossy_kerr(cfg: InterferometerConfig) -> float:
    """Lossy Kerr Fisher bound at the closed-form ``(mu1, mu2)``."""
    if cfg.scheme is not Scheme.KERR:
        raise ValueError("qfi_lossy_kerr applies to the Kerr scheme")
    mom = _ideal_moments(cfg)
    mu1, mu2, _ = mu_optimal(mom, cfg.eta)
    return lossy_kerr_fisher(mom, cfg.eta, mu1, mu2)


def quantum_limits(N: float) -> tuple[float, float, float, float]:
    """``(SQL, HL, sub-HL, SHL) = (N^-1/2, N^-1, N^-3/2, N^-2)``."""
    if not N > 0:
        raise ValueError(f"photon number must be positive, got {N}")
    return N**-0.5, 1.0 / N, N**-1.5, N**-2.0
