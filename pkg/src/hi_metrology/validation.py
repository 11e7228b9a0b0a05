"""Closed forms versus the Fock oracle on a preset parameter grid."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import core, oracle
from .core import HOMODYNE_Q_ORDERS, InterferometerConfig, Scheme
from .errors import CutoffError, NumericalConsistencyError

PRESETS = {
    "quick": dict(alpha=(1.0, 2.0), g=(0.5, 1.0), mn=(0, 1), k=(1, 2), phi=(0.013, 1.6), eta=(1.0, 0.7)),
    "full": dict(alpha=(1.0, 2.0), g=(0.5, 1.0), mn=(0, 1, 2, 3), k=(1, 2), phi=(0.013, 1.6), eta=(1.0, 0.7, 0.4)),
}


def rel_dev(a: complex, b: complex, floor: float = 0.0) -> float:
    if a != a or b != b:
        return float("inf")
    scale = max(abs(a), abs(b), floor)
    return 0.0 if scale == 0 else abs(a - b) / scale


@dataclass
class Comparison:
    quantity: str
    config: InterferometerConfig
    closed: complex
    oracle: complex
    deviation: float


@dataclass
class ValidationReport:
    tolerance: float
    comparisons: list[Comparison] = field(default_factory=list)
    cutoffs: dict = field(default_factory=dict)

    def max_by_quantity(self) -> dict[str, Comparison]:
        worst: dict[str, Comparison] = {}
        for c in self.comparisons:
            key = c.quantity.split("[")[0]
            if key not in worst or c.deviation > worst[key].deviation:
                worst[key] = c
        return worst

    @property
    def failures(self) -> list[Comparison]:
        return [c for c in self.comparisons if not c.deviation <= self.tolerance]

    @property
    def passed(self) -> bool:
        return bool(self.comparisons) and not self.failures

    def render(self) -> str:
        lines = [f"{'quantity':<14} {'max rel dev':>12}  worst config"]
        for name, c in sorted(self.max_by_quantity().items()):
            lines.append(f"{name:<14} {c.deviation:12.3e}  {describe(c.config)}")
        for c in self.failures:
            lines.append(f"FAIL {c.quantity} dev={c.deviation:.3e} closed={c.closed!r} oracle={c.oracle!r} at {describe(c.config)}")
        lines.append(f"{len(self.comparisons)} comparisons, tolerance {self.tolerance:g}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _plain(x):
    x = complex(x)
    return x.real if x.imag == 0 else x


def describe(cfg: InterferometerConfig) -> str:
    return f"alpha={cfg.alpha_mag} g={cfg.g} m={cfg.m} n={cfg.n} k={cfg.k} phi={cfg.phi} eta={cfg.eta}"


def _oracle_quantities(session: oracle.OracleSession, homodyne_points) -> dict[str, complex]:
    """Everything the closed forms predict, measured on one oracle session."""
    out: dict[str, complex] = {"lambda2": session.lambda2, "N": session.mean_photon_number()}
    mom = session.photon_moments()
    for i, v in enumerate((mom.n1, mom.n2, mom.n3, mom.n4), 1):
        out[f"n{i}"] = v
    for order in HOMODYNE_Q_ORDERS:
        out[f"q{order}"] = session.normal_moment(*order) / session.lambda2
    for k, phi in homodyne_points:
        mean, second = session.homodyne(phi, k=k)
        out[f"mean_x[k={k},phi={phi}]"] = mean
        out[f"second_x[k={k},phi={phi}]"] = second
    return out


def _converged_session(base: InterferometerConfig, homodyne_points, rtol: float, start: int | None = None) -> oracle.OracleSession:
    """Smallest doubling cutoff whose quantities agree with the doubled box."""
    c = start or oracle.default_cutoff(base)
    session = oracle.OracleSession(base, c)
    prev = _oracle_quantities(session, homodyne_points)
    while True:
        bigger = oracle.OracleSession(base, 2 * c)
        cur = _oracle_quantities(bigger, homodyne_points)
        floor = {k: 1.0 if k.startswith("mean_x") else 0.0 for k in cur}
        if all(rel_dev(prev[k], cur[k], floor[k]) < rtol for k in cur):
            return session
        if 2 * c > 800:
            raise CutoffError("validation grid did not converge", suggested=4 * c)
        c, session, prev = 2 * c, bigger, cur


def run_validation(
    preset: str = "quick",
    *,
    tolerance: float = 1e-6,
    convergence_rtol: float = 1e-8,
    kerr_b_sign: int = -1,
    start_cutoff: int | None = None,
    progress=None,
) -> ValidationReport:
    """Compare every closed-form quantity with the oracle on ``preset``.

    ``kerr_b_sign=+1`` flips one sign in the Kerr mean and must fail; it
    exists as a negative control for the suite itself.  ``start_cutoff``
    replaces the heuristic first truncation of the doubling search.
    """
    grid = PRESETS[preset]
    report = ValidationReport(tolerance)
    points = list(itertools.product(grid["k"], grid["phi"]))
    for alpha, g, mn in itertools.product(grid["alpha"], grid["g"], grid["mn"]):
        base = InterferometerConfig(alpha_mag=alpha, g=g, m=mn, n=mn)
        session = _converged_session(base, points, convergence_rtol, start_cutoff)
        report.cutoffs[(alpha, g, mn)] = session.cutoff
        if progress:
            progress(f"alpha={alpha} g={g} m=n={mn}: cutoff {session.cutoff}")
        measured = _oracle_quantities(session, points)

        def add(name, cfg, closed, value, floor=0.0):
            closed, value = _plain(closed), _plain(value)
            report.comparisons.append(Comparison(name, cfg, closed, value, rel_dev(closed, value, floor)))

        add("lambda2", base, core.normalization(base), measured["lambda2"])
        add("N", base, core.mean_photon_number(base), measured["N"])
        mom = core.photon_moments(base)
        for i, v in enumerate((mom.n1, mom.n2, mom.n3, mom.n4), 1):
            add(f"n{i}", base, v, measured[f"n{i}"])
        Q = core.q_values(base, HOMODYNE_Q_ORDERS)
        for order in HOMODYNE_Q_ORDERS:
            add(f"q_value[{order}]", base, complex(Q[order]), measured[f"q{order}"])

        for eta in grid["eta"]:
            lossy = session if eta == 1 else oracle.OracleSession(base.replace(eta=eta), session.cutoff)
            for k, phi in points:
                cfg = base.replace(scheme=Scheme(k), phi=phi, eta=eta)
                if k == 2 and eta != 1:
                    continue  # no closed form: the oracle is the reference itself
                o_mean, o_second = lossy.homodyne(phi, k=k)
                try:
                    mean, second = core.homodyne_moments(cfg, kerr_b_sign=kerr_b_sign)
                except NumericalConsistencyError:
                    # a complex "mean" is itself a mismatch with the oracle
                    add("mean_x", cfg, complex("nan"), o_mean, float("inf"))
                    continue
                scale = abs(o_second) ** 0.5
                add("mean_x", cfg, mean, o_mean, scale)
                add("second_x", cfg, second, o_second)
    return report
