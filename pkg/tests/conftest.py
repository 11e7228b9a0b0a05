import sys
from functools import lru_cache

from hi_metrology import metrology
from hi_metrology.core import InterferometerConfig, Scheme


@lru_cache(maxsize=None)
def optimum(k: int, mn: int, alpha: float = 2.0, g: float = 1.0):
    """Optimal-phase search shared across test modules (the Kerr ones are slow)."""
    cfg = InterferometerConfig(alpha_mag=alpha, g=g, m=mn, n=mn, scheme=Scheme(k))
    return metrology.optimal_phase(cfg)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
