"""``hi-metrology`` command line: figure data, parameter scans and validation.

Parameters are given as ``--set key=value`` (or the shorthand ``--key value``),
or as ``key = value`` lines in a ``--config`` file.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 numerical
consistency error.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import figures, metrology
from .errors import NumericalConsistencyError

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Parameter handling
# --------------------------------------------------------------------------


def parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise UsageError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return figures.canonical_key(key), value.strip()


def read_config_file(path: str) -> list[tuple[str, str]]:
    """``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    pairs = []
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{number}: expected 'key = value'")
        pairs.append(parse_assignment(line))
    return pairs


def build_params(pairs: list[tuple[str, str]], allowed: set[str], extra: dict | None = None) -> dict:
    """Parse overrides, rejecting unknown or disallowed keys."""
    extra = extra or {}
    params: dict = {}
    for key, value in pairs:
        if key == "mn" and {"m", "n"} <= allowed:
            params["m"] = params["n"] = _parse(int, key, value)
        elif key in extra:
            params[key] = _parse(extra[key], key, value)
        elif key in figures.FIELD_PARSERS and key in allowed:
            params[key] = _parse(figures.FIELD_PARSERS[key], key, value)
        elif key in figures.FIELD_PARSERS or key == "mn":
            raise UsageError(f"parameter {key!r} cannot be overridden here")
        else:
            raise UsageError(f"unknown parameter {key!r}")
    try:
        figures.make_config({k: v for k, v in params.items() if k in figures.FIELD_PARSERS})
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return params


def _parse(kind, key, value):
    try:
        return kind(value)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_cell(v) for v in row) + "\n")
    return buf.getvalue()


def write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def worker_count() -> int:
    cap = os.environ.get("HIM_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"HIM_THREADS must be an integer, got {cap!r}") from None
    return n


def run_grid(fn, items, cutoff: int | None = None) -> list:
    """Evaluate ``fn`` over ``items``; results come back in grid order."""
    metrology.set_oracle_cutoff(cutoff)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers, initializer=metrology.set_oracle_cutoff, initargs=(cutoff,)) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_figure(args) -> int:
    fig = figures.FIGURES.get(args.id)
    if fig is None:
        raise UsageError(f"unknown figure {args.id!r}; choose from {', '.join(figures.FIGURES)}")
    pairs = _config_pairs(args)
    params = build_params(pairs, figures.allowed_overrides(fig), {"lo": float, "hi": float, "points": int})
    grid_args = {k: params.pop(k) for k in ("lo", "hi", "points") if k in params}
    if grid_args.get("points", 2) < 1:
        raise UsageError("points must be positive")
    xs = [float(x) for x in fig.grid(**grid_args)]
    rows = run_grid(partial(figures.figure_row, fig.id, params), xs, args.cutoff)
    write_output(render_csv(fig.columns, rows), args.out)
    return EXIT_OK


def parse_sweep(text: str) -> tuple[str, list]:
    key, _, rng = text.partition("=")
    key = figures.canonical_key(key)
    parts = rng.split(":")
    if key == "mn":
        kind = int
    elif key in figures.FIELD_PARSERS:
        kind = figures.FIELD_PARSERS[key]
    else:
        raise UsageError(f"cannot sweep unknown parameter {key!r}")
    if len(parts) != 3:
        raise UsageError(f"sweep must look like key=lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad sweep range {rng!r}") from None
    if count < 1 or hi < lo or (count > 1 and hi == lo):
        raise UsageError(f"invalid sweep range {rng!r}")
    values = [lo] if count == 1 else [float(v) for v in np.linspace(lo, hi, count)]
    if kind is int:
        if any(v != round(v) for v in values):
            raise UsageError(f"{key} sweep must land on integers")
        values = [int(round(v)) for v in values]
    return key, values


def cmd_scan(args) -> int:
    if len(args.sweep) != 1:
        raise UsageError("exactly one --sweep is required")
    key, values = parse_sweep(args.sweep[0])
    metrics = tuple(m for item in args.metric for m in item.split(",") if m)
    unknown = [m for m in metrics if m not in figures.METRICS]
    if not metrics or unknown:
        raise UsageError(f"metrics must be chosen from {', '.join(figures.METRICS)}")
    if "qfi" in metrics and "lossy_qfi" in metrics:
        raise UsageError("qfi and lossy_qfi both fill the F column; request one")
    params = build_params(_config_pairs(args), set(figures.FIELD_PARSERS))
    if key in params or (key == "mn" and ("m" in params or "n" in params)):
        raise UsageError(f"{key} is both swept and fixed")
    points = []
    for v in values:
        p = dict(params)
        if key == "mn":
            p["m"] = p["n"] = v
        else:
            p[key] = v
        try:
            figures.make_config(p)
        except ValueError as exc:
            raise UsageError(f"sweep value {key}={v}: {exc}") from exc
        points.append(p)
    if "optimal_phase" in metrics and any(figures.make_config(p).eta < 1 for p in points):
        print("note: phi_opt under loss is re-optimized at each eta (an extension; figure fig8 keeps phi fixed)", file=sys.stderr)
    rows = run_grid(partial(_scan_point, metrics), points, args.cutoff)
    write_output(render_csv(figures.SCAN_COLUMNS, rows), args.out)
    return EXIT_OK


def _scan_point(metrics, params):
    return figures.scan_row(params, metrics)


def cmd_validate(args) -> int:
    from .validation import run_validation

    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    if not args.tolerance > 0:
        raise UsageError("tolerance must be positive")
    report = run_validation(
        args.preset,
        tolerance=args.tolerance,
        kerr_b_sign=+1 if args.negative_control else -1,
        start_cutoff=args.cutoff,
        progress=progress,
    )
    print(report.render())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _config_pairs(args) -> list[tuple[str, str]]:
    pairs = read_config_file(args.config) if args.config else []
    return pairs + [parse_assignment(s) for s in args.set]


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hi-metrology", description="Hybrid-interferometer phase-sensitivity calculator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override")
        p.add_argument("--config", help="file of 'key = value' lines applied before --set")
        cutoff_arg(p, "fixed Fock cutoff for oracle-backed (lossy Kerr) points; default: converge by doubling")

    def cutoff_arg(p, text):
        p.add_argument("--cutoff", type=positive_int, help=text)

    fig = sub.add_parser("figure", help="emit the data behind one figure")
    fig.add_argument("id", help=", ".join(figures.FIGURES))
    common(fig)
    fig.set_defaults(func=cmd_figure)

    scan = sub.add_parser("scan", help="sweep one parameter")
    scan.add_argument("--sweep", action="append", default=[], metavar="KEY=LO:HI:COUNT")
    scan.add_argument("--metric", action="append", default=[], help=", ".join(figures.METRICS))
    common(scan)
    scan.set_defaults(func=cmd_scan)

    val = sub.add_parser("validate", help="closed forms versus the Fock oracle")
    val.add_argument("--preset", choices=("quick", "full"), default="quick")
    val.add_argument("--negative-control", action="store_true", help="flip one Kerr sign; the run must fail")
    val.add_argument("--tolerance", type=float, default=1e-6, help="maximum relative deviation (default 1e-6)")
    cutoff_arg(val, "first cutoff of the doubling convergence search")
    val.add_argument("--quiet", action="store_true")
    val.set_defaults(func=cmd_validate)
    return parser


def shorthand_sets(extra: list[str]) -> list[str]:
    """Turn leftover ``--key value`` / ``--key=value`` words into ``key=value``."""
    out, i = [], 0
    while i < len(extra):
        word = extra[i]
        if not word.startswith("--") or len(word) == 2:
            raise UsageError(f"unrecognized argument {word!r}")
        if "=" in word:
            out.append(word[2:])
            i += 1
        elif i + 1 < len(extra):
            out.append(f"{word[2:]}={extra[i + 1]}")
            i += 2
        else:
            raise UsageError(f"missing value for {word}")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if extra:
            if args.command == "validate":
                raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
            args.set = shorthand_sets(extra) + args.set
        return args.func(args)
    except UsageError as exc:
        print(f"hi-metrology: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalConsistencyError as exc:
        print(f"hi-metrology: numerical consistency error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
