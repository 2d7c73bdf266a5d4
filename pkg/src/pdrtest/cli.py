"""Command-line front end: ``test``, ``dim``, and ``simulate`` subcommands.

Exit status reflects operation, not the statistical decision: 0 means the
command ran (whether or not the null was rejected), 2 means an I/O
problem, 3 a data or configuration problem, 4 a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

import numpy as np

from .dataset import BOSTON_COLUMNS, Dataset, Schema, boston_path, load_csv, prepare_boston
from .errors import DataError, SingularityError
from .lackfit import TestReport, run_test
from .sdr import estimate_basis
from .simulate import (
    emit_table,
    power_experiment,
    read_experiment_spec,
    render_csv,
    render_curves,
    render_text,
    resolve_workers,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _columns(arg: str | None) -> tuple[str, ...]:
    if not arg:
        return ()
    return tuple(c.strip() for c in arg.split(",") if c.strip())


def _resolve_seed(arg: int | None) -> int:
    # a fresh seed is generated (and printed) when none is supplied, so
    # every run can be reproduced from its own report
    return secrets.randbelow(2**63) if arg is None else arg


def _load_dataset(args) -> Dataset:
    if args.preset == "boston":
        path = args.data if args.data else boston_path()
        predictors = tuple(c for c in BOSTON_COLUMNS if c != "MEDV")
        raw = load_csv(path, Schema(y="MEDV", x=predictors))
        ds = prepare_boston(raw)
    else:
        if not args.data:
            raise DataError("--data is required (or use --preset boston)")
        if not args.y or not args.x:
            raise DataError("--y and --x are required without a preset")
        schema = Schema(y=args.y, x=_columns(args.x), w=_columns(args.w))
        ds = load_csv(args.data, schema)
    if ds.dropped_rows:
        print(f"note: {ds.dropped_rows} row(s) dropped (missing or non-numeric cells)",
              file=sys.stderr)
    return ds


def _dataset_config(args, ds: Dataset) -> dict:
    names = ds.column_names
    if args.data:
        data_path = str(args.data)
    else:
        data_path = str(boston_path()) if args.preset else ""
    return {
        "data": data_path,
        "preset": args.preset,
        "y": names.y if names else None,
        "x": list(names.x) if names else None,
        "w": list(names.w) if names else None,
        "n": ds.n,
        "dropped_rows": ds.dropped_rows,
    }


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _report_text(report: TestReport, config: dict) -> str:
    lines = [
        f"t_n        = {report.t_n!r}",
        f"p_hat      = {report.p_hat!r}",
        f"q_hat      = {report.q_hat}",
        f"alpha      = {report.alpha!r}",
        f"decision   = {'reject' if report.reject else 'fail to reject'}",
        f"m          = {report.m}",
        f"c_n        = {report.c_n!r}",
        f"seed       = {report.seed}",
        f"converged  = {report.fit.converged}",
        f"eigenvalues = {[float(v) for v in report.eigenvalues]!r}",
    ]
    for j, col in enumerate(report.b.T, start=1):
        lines.append(f"b[{j}]       = {[float(v) for v in col]!r}")
    lines.append(
        "mc         = "
        f"count {report.mc_stats.count}, min {report.mc_stats.minimum!r}, "
        f"median {report.mc_stats.median!r}, max {report.mc_stats.maximum!r}"
    )
    if report.fit_warning:
        lines.append("warning    = fit did not converge")
    lines.append("config     = " + json.dumps(config, sort_keys=True))
    return "\n".join(lines) + "\n"


def _report_json(report: TestReport, config: dict) -> str:
    record = report.to_record()
    record.update(
        {
            "alpha": report.alpha,
            "reject": report.reject,
            "c_n": report.c_n,
            "family": report.family,
            "fit_warning": report.fit_warning,
            "mc": {
                "count": report.mc_stats.count,
                "min": report.mc_stats.minimum,
                "median": report.mc_stats.median,
                "max": report.mc_stats.maximum,
            },
            "config": config,
        }
    )
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def cmd_test(args) -> int:
    ds = _load_dataset(args)
    seed = _resolve_seed(args.seed)
    report = run_test(
        ds, args.family, m=args.mc_reps, c_n=args.cn, seed=seed, alpha=args.alpha
    )
    config = _dataset_config(args, ds)
    config.update(
        {"command": "test", "family": args.family, "m": args.mc_reps,
         "c_n": report.c_n, "alpha": args.alpha, "seed": seed}
    )
    text = _report_json(report, config) if args.format == "json" else _report_text(report, config)
    _emit(text, args.out)
    return EXIT_OK


def cmd_dim(args) -> int:
    ds = _load_dataset(args)
    basis = estimate_basis(ds, args.cn)
    lam = basis.eigenvalues
    sq = lam**2
    ratios = (sq[1:] + basis.ridge) / (sq[:-1] + basis.ridge)
    config = _dataset_config(args, ds)
    config.update({"command": "dim", "c_n": basis.ridge})
    if args.format == "json":
        record = {
            "q_hat": basis.q_hat,
            "eigenvalues": [float(v) for v in lam],
            "ridge_ratios": [float(v) for v in ratios],
            "c_n": basis.ridge,
            "b_columns": [[float(v) for v in col] for col in basis.b.T],
            "config": config,
        }
        text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    else:
        lines = [
            f"q_hat       = {basis.q_hat}",
            f"c_n         = {basis.ridge!r}",
            f"eigenvalues = {[float(v) for v in lam]!r}",
            f"ridge_ratios = {[float(v) for v in ratios]!r}",
        ]
        for j, col in enumerate(basis.b.T, start=1):
            lines.append(f"b[{j}]        = {[float(v) for v in col]!r}")
        lines.append("config      = " + json.dumps(config, sort_keys=True))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = read_experiment_spec(args.spec)
    table = power_experiment(
        spec.designs(), spec.reps, spec.mc_reps, spec.alpha, spec.seed,
        workers=resolve_workers(args.workers),
    )
    out = args.out or spec.out
    renderer = {"csv": render_csv, "text": render_text, "curves": render_curves}[args.format]
    if out:
        emit_table(table, out, format=args.format)
        print(f"wrote {len(table.rows)} row(s) to {out}")
    else:
        print(renderer(table), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdrtest",
        description="Lack-of-fit testing for partially parametric single-index models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--preset", choices=["boston"],
                       help="use a built-in preparation pipeline (bundled data when --data is omitted)")
        p.add_argument("--y", help="response column")
        p.add_argument("--x", help="comma-separated index covariate columns")
        p.add_argument("--w", help="comma-separated plain covariate columns", default="")
        p.add_argument("--cn", type=float, default=None,
                       help="ridge constant for the dimension decision (default log(n)/n)")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=["text", "json"], default="text")

    p_test = sub.add_parser("test", help="run the lack-of-fit test on a dataset")
    add_data_flags(p_test)
    p_test.add_argument("--family", default="linear",
                        help="hypothesized mean family (default: linear)")
    p_test.add_argument("--mc-reps", type=int, default=2000,
                        help="Monte Carlo replicates (default 2000)")
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument("--seed", type=int, default=None,
                        help="RNG seed; generated and printed when omitted")
    p_test.set_defaults(func=cmd_test)

    p_dim = sub.add_parser("dim", help="estimate directions and structural dimension")
    add_data_flags(p_dim)
    p_dim.set_defaults(func=cmd_dim)

    p_sim = sub.add_parser("simulate", help="run a size/power experiment from a spec file")
    p_sim.add_argument("--spec", required=True, help="experiment specification file")
    p_sim.add_argument("--out", help="output path (overrides 'out' from the experiment file)")
    p_sim.add_argument("--format", choices=["csv", "text", "curves"], default="csv")
    p_sim.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: PDRTEST_WORKERS env var, or 1)")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"error: linear algebra failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError) as exc:
        # DataError and configuration mistakes (bad alpha, zero replicates)
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
