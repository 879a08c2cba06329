"""Command-line entry points: ``fit``, ``simulate`` and ``transform``.

Run as ``python -m blocktau <command> ...``. Exit codes: 0 success, 2 input
or configuration error, 3 tied observations, 4 singular covariance or
correlation matrix, 5 dense-size guard exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .covariance import SingularCovarianceError
from .estimator import precision_matrix, project_tau, sine_transform
from .kendall import TieError, as_data_matrix, kendall_tau
from .pairs import vectorize
from .partitions import CapacityError, Partition
from .path import build_path, select_structure
from .simulate import Scenario, run_study

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_INPUT, EXIT_TIES, EXIT_SINGULAR, EXIT_CAPACITY = 0, 2, 3, 4, 5


class ParseError(ValueError):
    pass


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def read_csv_matrix(path: str, delimiter: str = ",", header: bool | None = None):
    """Parse a numeric CSV file.

    Parameters
    ----------
    header : bool, optional
        Whether the first row holds column names. When None it is detected:
        a first row with any non-numeric field is a header.

    Returns
    -------
    values : ndarray of shape (n, d)
    names : list of str or None
    """
    try:
        with open(path, newline="") as fh:
            rows = [(k + 1, row) for k, row in enumerate(csv.reader(fh, delimiter=delimiter))]
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    rows = [(ln, r) for ln, r in rows if r and any(f.strip() for f in r)]
    if not rows:
        raise ParseError(f"{path}: no data")
    names = None
    first = rows[0][1]
    if header is None:
        header = not all(_is_number(f) for f in first)
    if header:
        names = [f.strip() for f in first]
        rows = rows[1:]
    width = len(names) if names is not None else len(rows[0][1]) if rows else 0
    out = []
    for ln, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}, line {ln}: expected {width} fields, got {len(row)}")
        try:
            out.append([float(f) for f in row])
        except ValueError:
            bad = next(f for f in row if not _is_number(f))
            raise ParseError(f"{path}, line {ln}: non-numeric field {bad!r}") from None
    X = np.asarray(out, dtype=float).reshape(len(out), width)
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{path}: non-finite values")
    if X.shape[0] < 3 or X.shape[1] < 2:
        raise ParseError(f"{path}: need at least 3 rows and 2 columns, got {X.shape}")
    return X, names


def _dump(obj, path: str | None):
    text = json.dumps(obj, indent=1, sort_keys=False, allow_nan=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _summary(v: np.ndarray) -> dict:
    return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}


def cmd_fit(args) -> int:
    if not 0.0 <= args.shrinkage <= 1.0:
        raise ParseError(f"--shrinkage must lie in [0, 1], got {args.shrinkage}")
    if not 0.0 < args.alpha < 1.0:
        raise ParseError(f"--alpha must lie in (0, 1), got {args.alpha}")
    X, names = read_csv_matrix(args.input, args.delimiter, args.header)
    if args.break_ties:
        # ordinal ranks carry no ties, so the covariance sees the same data
        X = as_data_matrix(X, ties="break")
    tau = kendall_tau(X)
    path = build_path(tau, X, w=args.shrinkage, mode=args.mode)
    i, G = select_structure(path, args.alpha)
    T = path.tau(i).matrix()
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "tool": "blocktau", "version": __version__, "command": "fit",
            "config": {"input": args.input, "delimiter": args.delimiter,
                       "shrinkage": args.shrinkage, "alpha": args.alpha,
                       "mode": args.mode, "emit_matrices": args.emit_matrices,
                       "shrink_correlation": args.shrink_correlation},
        },
        "data": {"n": int(X.shape[0]), "d": int(X.shape[1]), "columns": names},
        "tau_hat": {"summary": _summary(tau.tau), "matrix": tau.matrix().tolist()},
        "path": path.to_dict(),
        "selection": {"level": args.alpha, "i": i, "partition": G.to_json_obj(),
                      "rule": "coarsest step whose chi-square tail is at least the level (heuristic)"},
        "tau_tilde": T.tolist(),
    }
    if args.emit_matrices:
        P = sine_transform(T)
        report["correlation"] = P.tolist()
        report["precision"] = precision_matrix(P, G, shrink=args.shrink_correlation).tolist()
    _dump(report, args.output)
    return EXIT_OK


def _load_scenario(args) -> Scenario:
    overrides = {}
    for key in ("replicates", "seed", "n", "w"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    try:
        if args.preset:
            return Scenario.preset(args.preset, **overrides)
        if not args.scenario:
            raise ParseError("give a scenario file or --preset")
        with open(args.scenario) as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict):
            raise ParseError("scenario file must hold a JSON object")
        obj.update(overrides)
        return Scenario.from_dict(obj)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"bad scenario: {exc}") from None


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args)
    result = run_study(scenario, workers=args.workers)
    text = result.to_jsonl()
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    if args.summary:
        _dump({"schema_version": SCHEMA_VERSION, "scenario": scenario.to_dict(),
               "aggregates": result.aggregates}, args.summary)
    return EXIT_OK


def _read_tau_matrix(path: str) -> np.ndarray:
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read {path}: {exc}") from None
        if isinstance(obj, dict):
            obj = obj.get("tau_tilde", obj.get("matrix"))
        try:
            T = np.asarray(obj, dtype=float)
        except (TypeError, ValueError):
            raise ParseError(f"{path}: expected a numeric matrix") from None
    else:
        try:
            with open(path, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r]
            T = np.asarray([[float(f) for f in r] for r in rows])
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read {path}: {exc}") from None
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 2:
        raise ParseError(f"{path}: expected a square Kendall matrix")
    return T


def cmd_transform(args) -> int:
    T = _read_tau_matrix(args.input)
    d = T.shape[0]
    try:
        G = Partition.from_json(args.partition) if args.partition else Partition.singletons(d)
        if G.d != d:
            raise ValueError(f"partition covers {G.d} variables, matrix has {d}")
        tau = project_tau(vectorize(T), G).matrix()
        P = sine_transform(tau)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    out = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {"tool": "blocktau", "version": __version__, "command": "transform"},
        "partition": G.to_json_obj(),
        "tau": tau.tolist(),
        "correlation": P.tolist(),
        "precision": precision_matrix(P, G, shrink=args.shrink_correlation).tolist(),
    }
    _dump(out, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocktau", description="Block structure detection in Kendall matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="detect the block structure of a data set")
    fit.add_argument("--input", required=True, help="CSV file, one observation per row")
    fit.add_argument("--output", default=None, help="JSON report (default: stdout)")
    fit.add_argument("--delimiter", default=",")
    hdr = fit.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_true", default=None)
    hdr.add_argument("--no-header", dest="header", action="store_false")
    fit.add_argument("--shrinkage", type=float, default=1.0, help="weight w in [0, 1]")
    fit.add_argument("--alpha", type=float, default=0.05, help="selection level in (0, 1)")
    fit.add_argument("--mode", choices=("full", "diag", "auto"), default="auto")
    fit.add_argument("--emit-matrices", action="store_true",
                     help="add the correlation and precision matrices")
    fit.add_argument("--shrink-correlation", action="store_true",
                     help="shrink the correlation toward the identity before inverting")
    fit.add_argument("--break-ties", action="store_true",
                     help="break tied values by row order instead of failing")
    fit.add_argument("--seed", type=int, default=None, help="reserved")
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="run a simulation study")
    sim.add_argument("scenario", nargs="?", help="scenario JSON file")
    sim.add_argument("--preset", default=None)
    sim.add_argument("--output", default=None, help="JSON-lines records (default: stdout)")
    sim.add_argument("--summary", default=None, help="JSON file for the aggregates")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--replicates", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--w", type=float, default=None)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("transform", help="Kendall to linear correlation and precision")
    tr.add_argument("--input", required=True, help="Kendall matrix as JSON or CSV")
    tr.add_argument("--partition", default=None, help="JSON list of 1-based clusters")
    tr.add_argument("--output", default=None)
    tr.add_argument("--shrink-correlation", action="store_true")
    tr.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIES
    except SingularCovarianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
