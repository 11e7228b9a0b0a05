"""Figure and scan definitions: which grid to sweep and which columns to emit.

Every figure is a one-dimensional sweep over ``x_key`` with one column per
subtraction order ``m = n`` and quantity.  Rows are computed by
:func:`figure_row`, a plain module-level function so it can run in a worker
process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core, metrology
from .core import InterferometerConfig, Scheme
from .errors import CutoffError, DegenerateStateError, SearchError, UndefinedSensitivityError

MN = (0, 1, 2, 3)
PHI_FIXED = {Scheme.LINEAR: 1.6, Scheme.KERR: 0.013}

# failures that leave a cell empty instead of aborting the run
SKIPPABLE = (DegenerateStateError, UndefinedSensitivityError, SearchError, CutoffError, ValueError)


def _cols(*prefixes: str) -> tuple[str, ...]:
    return tuple(f"{p}_mn{i}" for p in prefixes for i in MN)


@dataclass(frozen=True)
class Figure:
    id: str
    x_key: str
    lo: float
    hi: float
    points: int
    quantities: tuple[str, ...]
    fixed: dict = field(default_factory=dict)
    description: str = ""

    @property
    def columns(self) -> tuple[str, ...]:
        return (self.x_key,) + _cols(*self.quantities)

    def grid(self, lo=None, hi=None, points=None) -> np.ndarray:
        return np.linspace(self.lo if lo is None else lo, self.hi if hi is None else hi, self.points if points is None else points)


FIGURES: dict[str, Figure] = {
    fig.id: fig
    for fig in [
        Figure("fig2a", "phi", 0.01, math.pi - 0.01, 314, ("dphi",), {"scheme": 1}, "homodyne sensitivity vs phase, linear shifter"),
        Figure("fig2b", "phi", 0.0005, 0.05, 100, ("dphi",), {"scheme": 2}, "homodyne sensitivity vs phase, Kerr shifter"),
        Figure("fig3a", "alpha", 0.5, 3.0, 11, ("dphi1", "dphi2"), {}, "optimal sensitivity vs alpha, both schemes"),
        Figure("fig3b", "g", 0.2, 2.0, 10, ("dphi1", "dphi2"), {}, "optimal sensitivity vs gain, both schemes"),
        Figure("fig4a", "g", 0.0, 2.0, 21, ("n",), {}, "mean photon number vs gain"),
        Figure("fig4b", "alpha", 0.0, 3.0, 16, ("n",), {}, "mean photon number vs alpha"),
        Figure("fig5", "alpha", 0.5, 3.0, 11, ("n", "dphi1", "qcrb1", "dphi2", "qcrb2"), {}, "sensitivity at fixed phase and QCRB, parametrized by alpha"),
        Figure("fig6a", "alpha", 0.5, 3.0, 11, ("dphi", "n", "sql", "hl", "sub_hl", "shl"), {"scheme": 1}, "optimal sensitivity and quantum limits, linear"),
        Figure("fig6b", "alpha", 0.5, 3.0, 11, ("dphi", "n", "sql", "hl", "sub_hl", "shl"), {"scheme": 2}, "optimal sensitivity and quantum limits, Kerr"),
        Figure("fig8", "eta", 0.1, 1.0, 10, ("dphi1", "dphi2"), {}, "sensitivity at fixed phase vs transmissivity"),
        Figure("fig9a", "g", 0.0, 2.0, 21, ("f",), {"scheme": 1}, "ideal QFI vs gain, linear"),
        Figure("fig9b", "g", 0.0, 2.0, 21, ("f",), {"scheme": 2}, "ideal QFI vs gain, Kerr"),
        Figure("fig10a", "g", 0.0, 2.0, 21, ("qcrb1", "qcrb2"), {}, "ideal QCRB vs gain, both schemes"),
        Figure("fig10b", "alpha", 0.5, 3.0, 11, ("qcrb1", "qcrb2"), {}, "ideal QCRB vs alpha, both schemes"),
        Figure("fig11", "eta", 0.1, 1.0, 10, ("qcrb1", "qcrb2"), {}, "lossy QCRB vs transmissivity, both schemes"),
    ]
}

# config fields a user may set, with the parser for each value
FIELD_PARSERS = {
    "alpha": float,
    "theta_alpha": float,
    "g": float,
    "theta": float,
    "scheme": int,
    "m": int,
    "n": int,
    "phi": float,
    "eta": float,
}
ALIASES = {"alpha_mag": "alpha", "k": "scheme"}
DEFAULTS = {"alpha": 2.0, "theta_alpha": 0.0, "g": 1.0, "theta": 0.0, "scheme": 1, "m": 0, "n": 0, "phi": 0.0, "eta": 1.0}


def canonical_key(key: str) -> str:
    key = key.strip()
    return ALIASES.get(key, key)


def make_config(params: dict) -> InterferometerConfig:
    p = {**DEFAULTS, **params}
    return InterferometerConfig(
        alpha_mag=float(p["alpha"]),
        theta_alpha=float(p["theta_alpha"]),
        g=float(p["g"]),
        theta=float(p["theta"]),
        scheme=Scheme(int(p["scheme"])),
        m=int(p["m"]),
        n=int(p["n"]),
        phi=float(p["phi"]),
        eta=float(p["eta"]),
    )


def allowed_overrides(fig: Figure) -> set[str]:
    """Fields a figure lets the user change (not its x axis, nor what the curves fix)."""
    keys = set(FIELD_PARSERS) - {fig.x_key, "m", "n"}
    if "scheme" in fig.fixed or any(q[-1] in "12" for q in fig.quantities):
        keys.discard("scheme")
    if fig.id in ("fig2a", "fig2b", "fig5", "fig8"):
        keys.discard("phi")
    return keys


def _safe(fn):
    try:
        return fn()
    except SKIPPABLE:
        return None


def _quantity(name: str, cfg: InterferometerConfig):
    """Value of one figure quantity for one curve, ``None`` when undefined."""
    base, scheme = name, cfg.scheme
    if name[-1] in "12":
        base, scheme = name[:-1], Scheme(int(name[-1]))
    cfg = cfg.replace(scheme=scheme)
    if base == "n":
        return _safe(lambda: core.mean_photon_number(cfg))
    if base == "f":
        return _safe(lambda: metrology.qfi_ideal(cfg)[0])
    if base == "qcrb":
        if cfg.lossless:
            return _safe(lambda: metrology.qcrb(metrology.qfi_ideal(cfg)[0]))
        lossy = metrology.qfi_lossy_linear if scheme is Scheme.LINEAR else metrology.qfi_lossy_kerr
        return _safe(lambda: metrology.qcrb(lossy(cfg)))
    if base in ("sql", "hl", "sub_hl", "shl"):
        i = ("sql", "hl", "sub_hl", "shl").index(base)
        return _safe(lambda: metrology.quantum_limits(core.mean_photon_number(cfg))[i])
    raise KeyError(name)


def figure_row(fig_id: str, params: dict, x: float) -> list:
    """One CSV row (x value first) for ``fig_id`` at sweep position ``x``."""
    fig = FIGURES[fig_id]
    params = {**params, **fig.fixed, fig.x_key: x}
    row: list = [x]
    for q in fig.quantities:
        for mn in MN:
            cfg = make_config({**params, "m": mn, "n": mn})
            row.append(_figure_cell(fig, q, cfg))
    return row


def _figure_cell(fig: Figure, q: str, cfg: InterferometerConfig):
    if not q.startswith("dphi"):
        return _quantity(q, cfg)
    if q != "dphi":
        cfg = cfg.replace(scheme=Scheme(int(q[-1])))
    if fig.x_key == "phi":
        return _safe(lambda: metrology.phase_sensitivity(cfg).delta_phi)
    if fig.id in ("fig5", "fig8"):
        fixed = cfg.replace(phi=PHI_FIXED[cfg.scheme])
        return _safe(lambda: metrology.phase_sensitivity(fixed).delta_phi)
    return _safe(lambda: metrology.optimal_phase(cfg).delta_phi)


# --------------------------------------------------------------------------
# Generic scans
# --------------------------------------------------------------------------

SCAN_COLUMNS = (
    "alpha",
    "theta_alpha",
    "g",
    "theta",
    "k",
    "m",
    "n",
    "phi",
    "eta",
    "delta_phi",
    "phi_opt",
    "N",
    "F",
    "qcrb",
    "sql",
    "hl",
    "sub_hl",
    "shl",
    "source",
)
METRICS = ("sensitivity", "optimal_phase", "qfi", "qcrb", "lossy_qfi", "N", "limits")


def _fisher(cfg: InterferometerConfig, lossy: bool) -> float:
    if lossy and not cfg.lossless:
        fn = metrology.qfi_lossy_linear if cfg.scheme is Scheme.LINEAR else metrology.qfi_lossy_kerr
        return fn(cfg)
    return metrology.qfi_ideal(cfg)[0]


def scan_row(params: dict, metrics: tuple[str, ...]) -> list:
    """One scan record as a list aligned with :data:`SCAN_COLUMNS`."""
    cfg = make_config(params)
    rec: dict = {
        "alpha": cfg.alpha_mag,
        "theta_alpha": cfg.theta_alpha,
        "g": cfg.g,
        "theta": cfg.theta,
        "k": cfg.k,
        "m": cfg.m,
        "n": cfg.n,
        "phi": cfg.phi,
        "eta": cfg.eta,
    }
    if "sensitivity" in metrics:
        res = _safe(lambda: metrology.phase_sensitivity(cfg))
        if res is not None:
            rec["delta_phi"], rec["source"] = res.delta_phi, res.source
    if "optimal_phase" in metrics:
        res = _safe(lambda: metrology.optimal_phase(cfg))
        if res is not None:
            rec["delta_phi"], rec["phi_opt"], rec["source"] = res.delta_phi, res.phi, res.source
    if "qfi" in metrics or "lossy_qfi" in metrics or "qcrb" in metrics:
        lossy = "lossy_qfi" in metrics or ("qcrb" in metrics and "qfi" not in metrics)
        F = _safe(lambda: _fisher(cfg, lossy))
        rec["F"] = F
        if "qcrb" in metrics and F is not None:
            rec["qcrb"] = _safe(lambda: metrology.qcrb(F))
    if "N" in metrics or "limits" in metrics:
        N = _safe(lambda: core.mean_photon_number(cfg))
        rec["N"] = N
        if "limits" in metrics and N is not None:
            lim = _safe(lambda: metrology.quantum_limits(N))
            if lim is not None:
                rec["sql"], rec["hl"], rec["sub_hl"], rec["shl"] = lim
    return [rec.get(c) for c in SCAN_COLUMNS]
