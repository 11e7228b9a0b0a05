"""Brute-force two-mode Fock-space simulation of the interferometer.

Every step acts on a dense amplitude array ``amps[j, k]`` (``j`` photons in
mode a, ``k`` in mode b) through its exact action on Fock states, so the
result is independent of the generating-function machinery in
:mod:`hi_metrology.core` and serves as its ground truth.

Notes on exactness:

* The OPA is applied in normal-ordered (disentangled) form.  Each factor maps
  box components to box components only, so every amplitude inside the
  truncation box is exact; the only error is the probability that sits
  outside the box.
* The beam splitter conserves total photon number and is applied shell by
  shell with matrices built from ``a^dag -> (a^dag - i b^dag)/sqrt(2)``,
  ``b^dag -> (b^dag - i a^dag)/sqrt(2)``.  The output box is enlarged so
  every shell is complete.
* Loss is a Kraus sum over the number of photons lost from mode a.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .core import InterferometerConfig, PhotonMoments, Scheme
from .errors import CutoffError, DegenerateStateError, NumericalConsistencyError

__all__ = [
    "TwoModeState",
    "KrausEnsemble",
    "OracleMoments",
    "OracleSession",
    "prepare_input",
    "apply_opa",
    "subtract_photons",
    "apply_phase",
    "apply_bs",
    "apply_loss",
    "measure",
    "pipeline",
    "default_cutoff",
    "converged_cutoff",
    "bs_shell",
]

OBSERVABLES = ("n_a", "n_a^2", "n_a^3", "n_a^4", "X_a", "X_a^2", "N")


@dataclass
class TwoModeState:
    """Truncated Fock amplitudes; ``norm_weight`` tracks squared-norm changes
    caused by non-unitary steps (photon subtraction)."""

    amps: np.ndarray
    norm_weight: float = 1.0

    @property
    def cutoff_a(self) -> int:
        return self.amps.shape[0] - 1

    @property
    def cutoff_b(self) -> int:
        return self.amps.shape[1] - 1

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def leakage(self, layers: int = 2) -> float:
        """Relative probability in the top ``layers`` Fock layers of either mode."""
        p = np.abs(self.amps) ** 2
        top = p[-layers:, :].sum() + p[:-layers, -layers:].sum()
        return float(top / p.sum())

    def normalized(self) -> "TwoModeState":
        return TwoModeState(self.amps / math.sqrt(self.norm2), self.norm_weight)


@dataclass
class KrausEnsemble:
    """Mixed state as weighted pure branches (normalized branch states)."""

    branches: list[tuple[TwoModeState, float]] = field(default_factory=list)

    @property
    def trace(self) -> float:
        return float(sum(w * s.norm2 for s, w in self.branches))


def _as_ensemble(obj) -> KrausEnsemble:
    if isinstance(obj, KrausEnsemble):
        return obj
    return KrausEnsemble([(obj, 1.0)])


def prepare_input(alpha: complex, cutoffs: Sequence[int] | int, tail_tol: float = 1e-12) -> TwoModeState:
    """``|alpha>_a |0>_b`` truncated to ``cutoffs``."""
    ca, cb = (cutoffs, cutoffs) if isinstance(cutoffs, int) else cutoffs
    amps = np.zeros((ca + 1, cb + 1), dtype=complex)
    col = np.empty(ca + 1, dtype=complex)
    col[0] = math.exp(-abs(alpha) ** 2 / 2)
    for j in range(1, ca + 1):
        col[j] = col[j - 1] * alpha / math.sqrt(j)
    amps[:, 0] = col
    tail = 1.0 - float(np.sum(np.abs(col) ** 2))
    if tail > tail_tol:
        suggested = int(math.ceil(abs(alpha) ** 2 + 12 * abs(alpha) + 20))
        raise CutoffError(f"coherent tail {tail:.2e} beyond cutoff {ca}", suggested=suggested)
    return TwoModeState(amps)


def _series(amps: np.ndarray, step, coeff: complex) -> np.ndarray:
    """``sum_l coeff^l / l! * step^l (amps)``.

    ``step`` shifts the support by one layer per application, so the series
    terminates inside the box; it is summed in full because the term sizes
    are not monotonic in ``l``.
    """
    result = amps.copy()
    term = amps
    for l in range(1, min(amps.shape)):
        term = step(term) * (coeff / l)
        if not term.any():
            break
        result += term
    return result


def _ab(amps):
    # (a b psi)_{j,k} = sqrt((j+1)(k+1)) psi_{j+1,k+1}
    out = np.zeros_like(amps)
    j = np.sqrt(np.arange(1, amps.shape[0]))[:, None]
    k = np.sqrt(np.arange(1, amps.shape[1]))[None, :]
    out[:-1, :-1] = j * k * amps[1:, 1:]
    return out


def _adag_bdag(amps):
    # (a^dag b^dag psi)_{j,k} = sqrt(j k) psi_{j-1,k-1}
    out = np.zeros_like(amps)
    j = np.sqrt(np.arange(1, amps.shape[0]))[:, None]
    k = np.sqrt(np.arange(1, amps.shape[1]))[None, :]
    out[1:, 1:] = j * k * amps[:-1, :-1]
    return out


def apply_opa(state: TwoModeState, g: float, theta: float = 0.0, leak_tol: float | None = 1e-10) -> TwoModeState:
    """Two-mode squeezer ``exp(xi^* a b - xi a^dag b^dag)``, ``xi = g e^{i theta}``.

    Applied as ``exp(-e^{i theta} tanh g a^dag b^dag) cosh(g)^{-(n_a+n_b+1)}
    exp(e^{-i theta} tanh g a b)``.
    """
    if g == 0:
        return TwoModeState(state.amps.copy(), state.norm_weight)
    tg = math.tanh(g)
    amps = _series(state.amps, _ab, np.exp(-1j * theta) * tg)
    ja = np.arange(amps.shape[0])[:, None]
    kb = np.arange(amps.shape[1])[None, :]
    amps = amps * np.exp(-(ja + kb + 1) * math.log(math.cosh(g)))
    amps = _series(amps, _adag_bdag, -np.exp(1j * theta) * tg)
    out = TwoModeState(amps, state.norm_weight)
    if leak_tol is not None:
        missing = 1.0 - out.norm2 / state.norm2
        if missing > leak_tol:
            raise CutoffError(
                f"squeezed state leaks {missing:.2e} of its norm beyond cutoffs {amps.shape}",
                suggested=2 * max(amps.shape),
            )
    return out


def subtract_photons(state: TwoModeState, m: int, n: int) -> TwoModeState:
    """Apply ``a^m b^n`` without renormalizing."""
    amps = state.amps
    before = state.norm2
    for _ in range(m):
        out = np.zeros_like(amps)
        out[:-1, :] = np.sqrt(np.arange(1, amps.shape[0]))[:, None] * amps[1:, :]
        amps = out
    for _ in range(n):
        out = np.zeros_like(amps)
        out[:, :-1] = np.sqrt(np.arange(1, amps.shape[1]))[None, :] * amps[:, 1:]
        amps = out
    after = float(np.vdot(amps, amps).real)
    if after <= 1e-300 * max(before, 1e-300):
        raise DegenerateStateError(f"a^{m} b^{n} annihilates the state")
    return TwoModeState(amps, state.norm_weight * after / before)


def apply_phase(state: TwoModeState, phi: float, k: int) -> TwoModeState:
    """``exp(i phi n_a^k)``."""
    if k not in (1, 2):
        raise ValueError("phase-shifter power k must be 1 or 2")
    j = np.arange(state.amps.shape[0], dtype=float)
    return TwoModeState(state.amps * np.exp(1j * phi * j**k)[:, None], state.norm_weight)


# --------------------------------------------------------------------------
# Beam splitter
# --------------------------------------------------------------------------

_SHELLS: dict[int, np.ndarray] = {}
_SHELL_LOCK = threading.Lock()


def bs_shell(N: int) -> np.ndarray:
    """Beam-splitter matrix on the shell ``{|p, N-p>}``; column j is the image
    of ``|j, N-j>``.

    Built as ``exp(-i pi/4 H)`` from the eigenvectors of the tridiagonal
    generator ``H = a^dag b + a b^dag``, whose eigenvalues are the integers
    ``-N, -N+2, ..., N``.
    """
    with _SHELL_LOCK:
        U = _SHELLS.get(N)
        if U is None:
            if N == 0:
                U = np.ones((1, 1), dtype=complex)
            else:
                p = np.arange(N)
                off = np.sqrt((p + 1.0) * (N - p))
                vals, vecs = eigh_tridiagonal(np.zeros(N + 1), off)
                vals = np.round(vals)  # exact spectrum, removes eigensolver noise
                U = (vecs * np.exp(-0.25j * np.pi * vals)[None, :]) @ vecs.T
            _SHELLS[N] = U
        return U


def _shell_indices(ca: int, cb: int, N: int):
    j = np.arange(max(0, N - cb), min(N, ca) + 1)
    return j, N - j


def _bs_shells(batch: np.ndarray, shell_tol: float = 1e-32) -> list[np.ndarray | None]:
    """Beam splitter on a batch ``(B, ca+1, cb+1)`` of amplitude arrays.

    Returns one ``(B, N+1)`` array per output shell ``N`` (amplitudes of
    ``|p, N-p>``), or ``None`` for shells whose share of the total
    probability is below ``shell_tol``.
    """
    _, ca1, cb1 = batch.shape
    total = float(np.vdot(batch, batch).real)
    out: list[np.ndarray | None] = []
    for N in range(ca1 + cb1 - 1):
        j, k = _shell_indices(ca1 - 1, cb1 - 1, N)
        vec = batch[:, j, k]
        if np.vdot(vec, vec).real <= shell_tol * total:
            out.append(None)
            continue
        out.append(vec @ bs_shell(N)[:, j].T)
    while out and out[-1] is None:
        out.pop()
    return out


def apply_bs(state: TwoModeState, shell_tol: float = 1e-32) -> TwoModeState:
    """50:50 beam splitter ``exp(-i pi/4 (a^dag b + a b^dag))``.

    Shells whose input probability is below ``shell_tol`` (relative) are
    dropped; the output box is just large enough for the remaining shells.
    """
    shells = _bs_shells(state.amps[None], shell_tol)
    nmax = max(len(shells) - 1, 0)
    out = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    for N, res in enumerate(shells):
        if res is not None:
            p = np.arange(N + 1)
            out[p, N - p] = res[0]
    return TwoModeState(out, state.norm_weight)


def _shell_quadratures(shells: list[np.ndarray | None], weights: np.ndarray) -> tuple[complex, complex, float, float]:
    """Weighted ``<a>``, ``<a^2>``, ``<a^dag a>`` and total norm over shells."""
    a1 = 0j
    a2 = 0j
    nbar = 0.0
    norm = 0.0
    for N, s in enumerate(shells):
        if s is None:
            continue
        p = np.arange(N + 1)
        prob = np.abs(s) ** 2
        norm += float(weights @ prob.sum(axis=1))
        nbar += float(weights @ (prob @ p))
        # a |p+1, N-p> = sqrt(p+1) |p, N-p>
        if N + 1 < len(shells) and shells[N + 1] is not None:
            up = shells[N + 1][:, 1:]
            a1 += weights @ np.sum(np.conj(s) * up * np.sqrt(p + 1.0), axis=1)
        if N + 2 < len(shells) and shells[N + 2] is not None:
            up = shells[N + 2][:, 2:]
            a2 += weights @ np.sum(np.conj(s) * up * np.sqrt((p + 1.0) * (p + 2.0)), axis=1)
    return a1, a2, nbar, norm


# --------------------------------------------------------------------------
# Loss
# --------------------------------------------------------------------------


def apply_loss(state: TwoModeState, eta: float, weight_tol: float = 1e-24) -> KrausEnsemble:
    """Photon loss on mode a through a beam splitter of transmissivity ``eta``.

    Branch ``l`` is ``K_l psi`` with ``K_l |j> = sqrt(C(j, l)) eta^{(j-l)/2}
    (1-eta)^{l/2} |j-l>``; branch weights are relative to the input norm.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    norm = state.norm2
    if eta == 1:
        return KrausEnsemble([(state.normalized(), 1.0)])
    amps = state.amps
    ca = amps.shape[0] - 1
    j = np.arange(ca + 1)
    branches = []
    for l in range(ca + 1):
        src = j[l:]
        dst = src - l
        logc = 0.5 * (gammaln(src + 1) - gammaln(dst + 1) - gammaln(l + 1)) + 0.5 * dst * math.log(eta)
        if l:
            logc = logc + 0.5 * l * math.log1p(-eta)
        out = np.zeros_like(amps)
        out[dst, :] = np.exp(logc)[:, None] * amps[src, :]
        w = float(np.vdot(out, out).real) / norm
        if w > weight_tol:
            branches.append((TwoModeState(out / math.sqrt(w * norm), state.norm_weight), w))
    return KrausEnsemble(branches)


# --------------------------------------------------------------------------
# Measurement
# --------------------------------------------------------------------------


def _x_apply(amps: np.ndarray) -> np.ndarray:
    # X_a = (a + a^dag)/sqrt(2); caller pads so a^dag stays inside the box
    out = np.zeros_like(amps)
    s = np.sqrt(np.arange(1, amps.shape[0]))[:, None]
    out[:-1, :] += s * amps[1:, :]
    out[1:, :] += s * amps[:-1, :]
    return out / math.sqrt(2)


def _expect(state: TwoModeState, observable: str) -> complex:
    amps = state.amps
    if observable in ("X_a", "X_a^2"):
        padded = np.zeros((amps.shape[0] + 2, amps.shape[1]), dtype=complex)
        padded[:-2] = amps
        x = _x_apply(padded)
        if observable == "X_a":
            return np.vdot(padded, x)
        return np.vdot(padded, _x_apply(x))
    p = np.abs(amps) ** 2
    na = np.arange(amps.shape[0], dtype=float)[:, None]
    nb = np.arange(amps.shape[1], dtype=float)[None, :]
    if observable == "N":
        return complex(np.sum(p * (na + nb)))
    if observable.startswith("n_a"):
        power = 1 if observable == "n_a" else int(observable.split("^")[1])
        if not 1 <= power <= 4:
            raise ValueError(observable)
        return complex(np.sum(p * na**power))
    raise ValueError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")


def measure(target, observable: str) -> float:
    """Trace-weighted expectation value of ``observable``."""
    ens = _as_ensemble(target)
    num = 0j
    den = 0.0
    for state, w in ens.branches:
        num += w * _expect(state, observable)
        den += w * state.norm2
    value = num / den
    if abs(value.imag) > 1e-9 * (1.0 + abs(value.real)):
        raise NumericalConsistencyError(f"<{observable}> has imaginary residue {value.imag:.3e}")
    return value.real


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleMoments:
    mean_x: float
    second_x: float
    moments: PhotonMoments
    N: float
    lambda2: float
    cutoff: int

    def as_dict(self) -> dict[str, float]:
        return {
            "mean_x": self.mean_x,
            "second_x": self.second_x,
            "n1": self.moments.n1,
            "n2": self.moments.n2,
            "n3": self.moments.n3,
            "n4": self.moments.n4,
            "N": self.N,
            "lambda2": self.lambda2,
        }


def default_cutoff(cfg: InterferometerConfig) -> int:
    """Starting truncation for the doubling test."""
    base = cfg.alpha_mag**2 + 2 * math.sinh(cfg.g) ** 2
    return int(math.ceil((base + 3 * math.sqrt(base) + cfg.m + cfg.n) * 1.5)) + 10


class OracleSession:
    """Caches the phase-independent part of the pipeline for one configuration.

    The state after preparation, squeezing, subtraction and loss does not
    depend on phi, so phase scans only redo the phase shifter, the beam
    splitter and the measurement.  Kraus branches are pushed through the
    beam splitter as one batch.
    """

    def __init__(self, cfg: InterferometerConfig, cutoff: int):
        self.cfg = cfg
        self.cutoff = int(cutoff)
        state = prepare_input(cfg.alpha, self.cutoff)
        state = apply_opa(state, cfg.g, cfg.theta, leak_tol=None)
        state = subtract_photons(state, cfg.m, cfg.n)
        self.lambda2 = 1.0 / state.norm_weight
        self.ideal = state.normalized()
        self.ensemble = apply_loss(self.ideal, cfg.eta)
        self._batch = np.stack([s.amps for s, _ in self.ensemble.branches])
        self._weights = np.array([w for _, w in self.ensemble.branches])

    def photon_moments(self) -> PhotonMoments:
        vals = [measure(self.ideal, f"n_a^{p}" if p > 1 else "n_a") for p in range(1, 5)]
        return PhotonMoments(*vals, lambda2=self.lambda2)

    def mean_photon_number(self) -> float:
        return measure(self.ideal, "N")

    def _phased(self, phi: float, k: int) -> np.ndarray:
        j = np.arange(self._batch.shape[1], dtype=float)
        return self._batch * np.exp(1j * phi * j**k)[None, :, None]

    def homodyne(self, phi: float | None = None, method: str = "bs", k: int | None = None) -> tuple[float, float]:
        """``<X_a>`` and ``<X_a^2>`` at the output port.

        ``method="bs"`` propagates the branches through the beam splitter;
        ``method="heisenberg"`` instead evaluates the output-mode operator
        ``(a - i b)/sqrt(2)`` on the pre-splitter branches, which is much
        cheaper and agrees to rounding.  ``k`` overrides the shifter power.
        """
        phi = self.cfg.phi if phi is None else float(phi)
        k = self.cfg.k if k is None else int(k)
        if k not in (1, 2):
            raise ValueError("phase-shifter power k must be 1 or 2")
        if method == "heisenberg":
            return self._homodyne_heisenberg(phi, k)
        if method != "bs":
            raise ValueError(f"unknown method {method!r}")
        a1, a2, nbar, norm = _shell_quadratures(_bs_shells(self._phased(phi, k)), self._weights)
        # X = (a + a^dag)/sqrt(2): <X> = sqrt(2) Re<a>, <X^2> = Re<a^2> + <n> + 1/2
        mean = math.sqrt(2) * a1.real / norm
        second = (a2.real + nbar) / norm + 0.5
        return mean, second

    def _homodyne_heisenberg(self, phi: float, k: int) -> tuple[float, float]:
        P = self._phased(phi, k)
        w = self._weights
        sj = np.sqrt(np.arange(1, P.shape[1], dtype=float))[None, :, None]
        sk = np.sqrt(np.arange(1, P.shape[2], dtype=float))[None, None, :]
        aP = sj * P[:, 1:, :]  # (a psi)_{j,k} for j < ca
        bP = sk * P[:, :, 1:]

        def ev(left, right):
            return complex(w @ np.sum(np.conj(left) * right, axis=(1, 2)))

        prob = np.abs(P) ** 2
        norm = float(w @ prob.sum(axis=(1, 2)))
        ea = ev(P[:, :-1, :], aP)
        eb = ev(P[:, :, :-1], bP)
        eaa = ev(P[:, :-2, :], sj[:, :-1] * aP[:, 1:, :])
        ebb = ev(P[:, :, :-2], sk[:, :, :-1] * bP[:, :, 1:])
        eab = ev(P[:, :-1, :-1], sk * aP[:, :, 1:])
        na = float(w @ (prob.sum(axis=2) @ np.arange(P.shape[1])))
        nb = float(w @ (prob.sum(axis=1) @ np.arange(P.shape[2])))
        # <a^dag b> = sum_{j,k} conj((a psi)_{j,k}) (b psi)_{j,k}
        eadb = ev(aP[:, :, :-1], bP[:, :-1, :])
        a_out = (ea - 1j * eb) / math.sqrt(2)
        a_out2 = (eaa - 2j * eab - ebb) / 2
        n_out = (na + nb - 1j * eadb + 1j * eadb.conjugate()) / 2
        mean = math.sqrt(2) * a_out.real / norm
        second = (a_out2.real + n_out.real) / norm + 0.5
        return mean, second

    def normal_moment(self, x1: int, y1: int, x2: int, y2: int) -> complex:
        """``<a^dag^x1 a^y1 b^dag^x2 b^y2>`` on the normalized ideal state."""
        left = self.ideal.amps
        right = left
        for _ in range(x1):
            left = _lower_a(left)
        for _ in range(y1):
            right = _lower_a(right)
        for _ in range(x2):
            left = _lower_b(left)
        for _ in range(y2):
            right = _lower_b(right)
        return complex(np.vdot(left, right))

    def moments(self, phi: float | None = None) -> OracleMoments:
        mean, second = self.homodyne(phi)
        return OracleMoments(
            mean_x=mean,
            second_x=second,
            moments=self.photon_moments(),
            N=self.mean_photon_number(),
            lambda2=self.lambda2,
            cutoff=self.cutoff,
        )


def _lower_a(amps):
    out = np.zeros_like(amps)
    out[:-1, :] = np.sqrt(np.arange(1, amps.shape[0]))[:, None] * amps[1:, :]
    return out


def _lower_b(amps):
    out = np.zeros_like(amps)
    out[:, :-1] = np.sqrt(np.arange(1, amps.shape[1]))[None, :] * amps[:, 1:]
    return out


def _max_rel_change(a: dict[str, float], b: dict[str, float]) -> float:
    worst = 0.0
    for key in a:
        scale = max(abs(a[key]), abs(b[key]), 1e-300)
        worst = max(worst, abs(a[key] - b[key]) / scale)
    return worst


def converged_cutoff(
    cfg: InterferometerConfig,
    start: int | None = None,
    rtol: float = 1e-8,
    max_cutoff: int = 800,
) -> tuple[int, OracleMoments]:
    """Double the cutoff until every reported moment changes by < ``rtol``.

    Returns the smaller cutoff of the first passing pair (its moments agree
    with the doubled box to ``rtol``) together with the doubled-box moments.
    """
    c = start or default_cutoff(cfg)
    prev = OracleSession(cfg, c).moments()
    while True:
        c2 = 2 * c
        if c2 > max_cutoff:
            raise CutoffError(f"no convergence up to cutoff {max_cutoff}", suggested=c2)
        cur = OracleSession(cfg, c2).moments()
        if _max_rel_change(prev.as_dict(), cur.as_dict()) < rtol:
            return c, cur
        c, prev = c2, cur


def pipeline(cfg: InterferometerConfig, cutoffs: int | None = None, rtol: float = 1e-8) -> OracleMoments:
    """Full simulation of ``cfg``; with ``cutoffs=None`` the cutoff is found by doubling."""
    if cutoffs is None:
        return converged_cutoff(cfg, rtol=rtol)[1]
    return OracleSession(cfg, cutoffs).moments()
