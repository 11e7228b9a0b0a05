"""Closed-form moments of the hybrid interferometer.

Pipeline: ``|alpha>_a |0>_b -> OPA(g e^{i theta}) -> a^m b^n -> (loss on a)
-> phase shifter exp(i phi n_a^k) -> 50:50 beam splitter -> homodyne on a``.

All normally ordered moments of the post-subtraction state come from one
exponential generating function ``exp(w4)`` whose mixed derivatives at the
origin are read off with :mod:`hi_metrology.jet`.  The Kerr scheme needs the
extra moments ``<e^{2 i t phi n_a} a^t b^dag^q b^s>``, produced by a second
kernel (``g5`` below) with a phi-dependent scalar prefactor.

Conventions: ``X_a = (a + a^dag) / sqrt(2)`` on output port ``a`` and the beam
splitter maps ``a -> (a - i b)/sqrt(2)``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateStateError, NumericalConsistencyError, RoutedToOracle
from .jet import extract_derivative, poly_exp, variables

__all__ = [
    "Scheme",
    "InterferometerConfig",
    "PhotonMoments",
    "q_value",
    "q_values",
    "normalization",
    "d_value",
    "d_values",
    "kerr_prefactor",
    "homodyne_moments",
    "photon_moments",
    "mean_photon_number",
    "HOMODYNE_Q_ORDERS",
]

IMAG_TOL = 1e-9


class Scheme(enum.IntEnum):
    LINEAR = 1
    KERR = 2


@dataclass(frozen=True)
class InterferometerConfig:
    """Physical parameters of one interferometer setting."""

    alpha_mag: float = 2.0
    g: float = 1.0
    scheme: Scheme = Scheme.LINEAR
    m: int = 0
    n: int = 0
    phi: float = 0.0
    eta: float = 1.0
    theta_alpha: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(int(self.scheme)))
        if self.alpha_mag < 0:
            raise ValueError("alpha_mag must be non-negative")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 0 or self.n < 0:
            raise ValueError("subtraction orders m, n must be non-negative integers")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")

    @property
    def k(self) -> int:
        return int(self.scheme)

    @property
    def alpha(self) -> complex:
        return self.alpha_mag * cmath.exp(1j * self.theta_alpha)

    @property
    def lossless(self) -> bool:
        return self.eta == 1

    def replace(self, **changes) -> "InterferometerConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class PhotonMoments:
    """``<n_a^p>`` for p = 1..4 on the normalized pre-beam-splitter state."""

    n1: float
    n2: float
    n3: float
    n4: float
    lambda2: float

    @property
    def var_n(self) -> float:
        return self.n2 - self.n1**2

    @property
    def var_n2(self) -> float:
        return self.n4 - self.n2**2


def _real(value: complex, what: str, tol: float = IMAG_TOL) -> float:
    value = complex(value)
    if abs(value.imag) > tol * (1.0 + abs(value.real)):
        raise NumericalConsistencyError(f"{what} has imaginary residue {value.imag:.3e} (real part {value.real:.6e})")
    return value.real


# --------------------------------------------------------------------------
# Q kernel: normally ordered moments of a^m b^n U_OPA |alpha, 0>
# --------------------------------------------------------------------------
#
# Variables l1..l8 enter w4 only through four sums:
#   l1 + l5 -> a^dag,  l2 + l7 -> a,  l3 + l6 -> b^dag,  l4 + l8 -> b.
# Q_{x1,y1,x2,y2} = <a^dag^(m+x1) a^(m+y1) b^dag^(n+x2) b^(n+y2)>, so the
# derivative orders on (l1, ..., l8) are (m, y1, x2, y2, x1, n, m, n).


def _q_orders(m: int, n: int, x1: int, y1: int, x2: int, y2: int) -> tuple[int, ...]:
    return (m, y1, x2, y2, x1, n, m, n)


def _w4(alpha: complex, g: float, theta: float, caps: Sequence[int], dtype):
    l1, l2, l3, l4, l5, l6, l7, l8 = variables(caps, dtype=dtype)
    ch, sh = math.cosh(g), math.sinh(g)
    ph = cmath.exp(1j * theta)
    w1 = (l2 + l7) * ch - (l3 + l6) * (sh * ph.conjugate())
    w2 = (l1 + l5) * ch - (l4 + l8) * (sh * ph)
    w3 = (l1 + l5) * sh * ((l2 + l7) * sh - (l3 + l6) * (ch * ph.conjugate())) - (l4 + l8) * (sh * ph) * (
        (l2 + l7) * ch - (l3 + l6) * (sh * ph.conjugate())
    )
    return w1 * alpha + w2 * alpha.conjugate() + w3


@lru_cache(maxsize=512)
def _q_series(alpha: complex, g: float, theta: float, caps: tuple[int, ...], dtype=np.complex128):
    return poly_exp(_w4(alpha, g, theta, caps, dtype))


def q_values(
    cfg: InterferometerConfig,
    orders: Iterable[tuple[int, int, int, int]],
    dtype=np.complex128,
) -> dict[tuple[int, int, int, int], complex]:
    """Unnormalized moments ``Q_{mn,x1,y1,x2,y2}`` for several orders at once.

    One exponential is built on the smallest box that covers every request.
    """
    orders = [tuple(int(v) for v in o) for o in orders]
    if not orders:
        return {}
    full = [_q_orders(cfg.m, cfg.n, *o) for o in orders]
    caps = tuple(max(col) for col in zip(*full))
    series = _q_series(cfg.alpha, float(cfg.g), float(cfg.theta), caps, dtype)
    return {o: complex(extract_derivative(series, f)) for o, f in zip(orders, full)}


def q_value(cfg: InterferometerConfig, x1: int, y1: int, x2: int, y2: int) -> complex:
    """``<a^dag^x1 a^y1 b^dag^x2 b^y2>`` on the unnormalized post-subtraction state."""
    return q_values(cfg, [(x1, y1, x2, y2)])[(x1, y1, x2, y2)]


def normalization(cfg: InterferometerConfig) -> float:
    """``lambda^2 = 1 / Q_{mn,0,0,0,0}``."""
    q0 = q_value(cfg, 0, 0, 0, 0)
    if abs(q0.imag) > IMAG_TOL * (1.0 + abs(q0.real)):
        raise NumericalConsistencyError(f"Q0 is not real: {q0}")
    if not q0.real > 1e-300:
        raise DegenerateStateError(
            f"photon subtraction (m={cfg.m}, n={cfg.n}) annihilates the state at alpha={cfg.alpha_mag}, g={cfg.g}"
        )
    return 1.0 / q0.real


# --------------------------------------------------------------------------
# D kernel: <a^dag^m b^dag^n e^{2 i t phi n_a} a^t b^dag^q b^s a^m b^n>
# --------------------------------------------------------------------------
#
# Variables (t1, tau1, t2, tau2, x1, x2, x3) with derivative orders
# (m, n, m, n, t, q, s).  Roles: t2 -> a^dag, t1 + x1 -> a,
# tau2 + x2 -> b^dag, tau1 + x3 -> b.


def kerr_prefactor(t: int, phi: float, g: float) -> complex:
    """``1 / (1 - (e^{2 i t phi} - 1) sinh^2 g)``."""
    eps = cmath.exp(2j * t * phi) - 1.0
    den = 1.0 - eps * math.sinh(g) ** 2
    if abs(den) < 1e-14:
        raise NumericalConsistencyError("Kerr prefactor denominator vanishes")
    return 1.0 / den


def _g5(alpha: complex, g: float, theta: float, t: int, phi: float, caps, dtype):
    t1, tau1, t2, tau2, x1, x2, x3 = variables(caps, dtype=dtype)
    ch, sh = math.cosh(g), math.sinh(g)
    ph = cmath.exp(1j * theta)
    eps = cmath.exp(2j * t * phi) - 1.0
    ac = alpha.conjugate()

    d1 = (t1 + x1) * (eps * sh**2)
    d2 = t2 * sh**2 + alpha * ch
    d3 = (x3 + tau1) * (-0.5 * math.sinh(2 * g) * ph)
    d4 = ac - (x2 + tau2) * (sh * ph.conjugate())

    g1 = (t1 * t2 + x1 * t2 + (x2 + tau2) * (x3 + tau1)) * sh**2
    g2 = (t1 + x1) * (alpha * ch) - abs(alpha) ** 2
    g3 = (d1 + d4 * (eps * ch)) * (d2 + d3) * kerr_prefactor(t, phi, g)
    g4 = d3 * ((ac / ch) + t1 + x1) + d4 * (t2 * ch + alpha)
    return g1 + g2 + g3 + g4


@lru_cache(maxsize=512)
def _d_series(alpha: complex, g: float, theta: float, t: int, phi: float, caps: tuple[int, ...], dtype=np.complex128):
    g5 = _g5(alpha, g, theta, t, phi, caps, dtype)
    c0 = g5.constant_term
    series = poly_exp(g5 - c0)
    return series, kerr_prefactor(t, phi, g) * np.exp(c0)


def d_values(
    cfg: InterferometerConfig,
    t: int,
    qs: Iterable[tuple[int, int]],
    phi: float | None = None,
    dtype=np.complex128,
) -> dict[tuple[int, int], complex]:
    """Kerr moments ``D_{mn,t,q,s}`` for one ``t`` and several ``(q, s)``."""
    qs = [(int(q), int(s)) for q, s in qs]
    phi = cfg.phi if phi is None else float(phi)
    full = [(cfg.m, cfg.n, cfg.m, cfg.n, t, q, s) for q, s in qs]
    caps = tuple(max(col) for col in zip(*full))
    series, scale = _d_series(cfg.alpha, float(cfg.g), float(cfg.theta), int(t), phi, caps, dtype)
    return {qs_: complex(scale * extract_derivative(series, f)) for qs_, f in zip(qs, full)}


def d_value(cfg: InterferometerConfig, t: int, q: int, s: int, conjugated: bool = False) -> complex:
    """Unnormalized ``<e^{2 i t phi n_a} a^t b^dag^q b^s>`` on the post-subtraction state."""
    if cfg.scheme is not Scheme.KERR:
        raise ValueError("d_value is defined for the Kerr scheme only")
    value = d_values(cfg, t, [(q, s)])[(q, s)]
    return value.conjugate() if conjugated else value


# --------------------------------------------------------------------------
# Homodyne moments
# --------------------------------------------------------------------------

HOMODYNE_Q_ORDERS = (
    (0, 0, 0, 0),
    (1, 0, 0, 0),
    (0, 1, 0, 0),
    (0, 0, 1, 0),
    (0, 0, 0, 1),
    (2, 0, 0, 0),
    (0, 2, 0, 0),
    (0, 0, 2, 0),
    (0, 0, 0, 2),
    (1, 1, 0, 0),
    (0, 0, 1, 1),
    (1, 0, 1, 0),
    (0, 1, 0, 1),
    (1, 0, 0, 1),
    (0, 1, 1, 0),
)


def _linear_moments(cfg: InterferometerConfig, phi: float) -> tuple[complex, complex]:
    lam2 = normalization(cfg)
    Q = q_values(cfg, HOMODYNE_Q_ORDERS)
    if cfg.eta != 1:
        # loss on a before the phase shifter: a -> sqrt(eta) a inside normal order
        Q = {o: v * cfg.eta ** ((o[0] + o[1]) / 2) for o, v in Q.items()}
    e1, e2 = cmath.exp(1j * phi), cmath.exp(2j * phi)
    mean = (e1.conjugate() * Q[1, 0, 0, 0] + 1j * Q[0, 0, 1, 0] + e1 * Q[0, 1, 0, 0] - 1j * Q[0, 0, 0, 1]) / 2
    second = (
        0.5 * e2.conjugate() * Q[2, 0, 0, 0]
        - 0.5 * Q[0, 0, 2, 0]
        + 1j * e1.conjugate() * Q[1, 0, 1, 0]
        + 0.5 * e2 * Q[0, 2, 0, 0]
        - 0.5 * Q[0, 0, 0, 2]
        - 1j * e1 * Q[0, 1, 0, 1]
        + Q[1, 1, 0, 0]
        - 1j * e1.conjugate() * Q[1, 0, 0, 1]
        + 1j * e1 * Q[0, 1, 1, 0]
        + Q[0, 0, 1, 1]
        + Q[0, 0, 0, 0]
    ) / 2
    return lam2 * mean, lam2 * second


def _kerr_moments(cfg: InterferometerConfig, phi: float, b_sign: int) -> tuple[complex, complex]:
    lam2 = normalization(cfg)
    Q = q_values(cfg, [(0, 0, 0, 0), (1, 1, 0, 0), (0, 0, 1, 1), (0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 2, 0), (0, 0, 0, 2)])
    D1 = d_values(cfg, 1, [(0, 0), (0, 1), (1, 0)], phi=phi)
    D2 = d_values(cfg, 2, [(0, 0)], phi=phi)
    d100, d101, d110 = D1[0, 0], D1[0, 1], D1[1, 0]
    d200 = D2[0, 0]
    e1, e4 = cmath.exp(1j * phi), cmath.exp(4j * phi)
    mean = (e1.conjugate() * d100.conjugate() + 1j * Q[0, 0, 1, 0] + e1 * d100 + b_sign * 1j * Q[0, 0, 0, 1]) / 2
    second = (
        0.5 * e4.conjugate() * d200.conjugate()
        + 1j * e1.conjugate() * d101.conjugate()
        - 0.5 * Q[0, 0, 2, 0]
        + 0.5 * e4 * d200
        - 1j * e1 * d101
        - 0.5 * Q[0, 0, 0, 2]
        + Q[1, 1, 0, 0]
        - 1j * e1.conjugate() * d110.conjugate()
        + 1j * e1 * d110
        + Q[0, 0, 1, 1]
        + Q[0, 0, 0, 0]
    ) / 2
    return lam2 * mean, lam2 * second


def homodyne_moments(
    cfg: InterferometerConfig,
    phi: float | None = None,
    *,
    kerr_b_sign: int = -1,
) -> tuple[float, float]:
    """``(<X_a>, <X_a^2>)`` on output port ``a``.

    ``phi`` overrides ``cfg.phi`` (used by finite-difference slopes).
    ``kerr_b_sign`` is the sign of the ``i <b>`` term in the Kerr mean; the
    physical value is -1, the other sign exists only as a negative control.

    Raises :class:`RoutedToOracle` for the lossy Kerr scheme.
    """
    phi = cfg.phi if phi is None else float(phi)
    if cfg.scheme is Scheme.LINEAR:
        mean, second = _linear_moments(cfg, phi)
    else:
        if cfg.eta != 1:
            raise RoutedToOracle("lossy Kerr homodyne moments have no closed form; use the Fock oracle")
        mean, second = _kerr_moments(cfg, phi, kerr_b_sign)
    return _real(mean, "<X_a>"), _real(second, "<X_a^2>")


def linear_mean_slope(cfg: InterferometerConfig, phi: float | None = None) -> float:
    """Analytic ``d<X_a>/d phi`` for the linear scheme (lossy or not)."""
    if cfg.scheme is not Scheme.LINEAR:
        raise ValueError("analytic slope only for the linear scheme")
    phi = cfg.phi if phi is None else float(phi)
    lam2 = normalization(cfg)
    Q = q_values(cfg, [(1, 0, 0, 0), (0, 1, 0, 0)])
    e1 = cmath.exp(1j * phi)
    slope = lam2 * math.sqrt(cfg.eta) * (-1j * e1.conjugate() * Q[1, 0, 0, 0] + 1j * e1 * Q[0, 1, 0, 0]) / 2
    return _real(slope, "d<X_a>/dphi")


# --------------------------------------------------------------------------
# Photon-number moments of mode a before the beam splitter
# --------------------------------------------------------------------------


def photon_moments(cfg: InterferometerConfig) -> PhotonMoments:
    """``<n_a>, ..., <n_a^4>`` on the ideal pre-beam-splitter state.

    Uses ``n^p = sum_j S(p, j) a^dag^j a^j`` with Stirling numbers of the
    second kind; the phase shifter commutes with ``n_a`` so phi drops out.
    """
    lam2 = normalization(cfg)
    Q = q_values(cfg, [(j, j, 0, 0) for j in range(1, 5)])
    q = {j: _real(lam2 * Q[j, j, 0, 0], f"<a^dag^{j} a^{j}>") for j in range(1, 5)}
    n1 = q[1]
    n2 = q[2] + q[1]
    n3 = q[3] + 3 * q[2] + q[1]
    n4 = q[4] + 6 * q[3] + 7 * q[2] + q[1]
    scale = max(1.0, abs(n4))
    if n1 < -1e-12 or n2 - n1**2 < -1e-9 * max(1.0, n2) or n4 - n2**2 < -1e-9 * scale:
        raise NumericalConsistencyError(f"photon moments violate positivity: {(n1, n2, n3, n4)}")
    return PhotonMoments(n1=max(n1, 0.0), n2=n2, n3=n3, n4=n4, lambda2=lam2)


def mean_photon_number(cfg: InterferometerConfig) -> float:
    """Total ``<n_a + n_b>`` inside the interferometer before the beam splitter."""
    lam2 = normalization(cfg)
    Q = q_values(cfg, [(1, 1, 0, 0), (0, 0, 1, 1)])
    return max(_real(lam2 * (Q[1, 1, 0, 0] + Q[0, 0, 1, 1]), "N"), 0.0)
