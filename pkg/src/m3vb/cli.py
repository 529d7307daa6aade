"""Command-line entry point: ``m3vb run | check | plot``.

Exit codes: 0 success, 1 usage error, 2 configuration or input file error,
3 runtime failure (including failed self-checks).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="m3vb", description="Min-max median variational Bayes experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    run = sub.add_parser("run", help="run an experiment grid from a TOML config")
    run.add_argument("config")
    run.add_argument("--full", action="store_true", help="use the full grids from the config")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    sub.add_parser("check", help="run built-in verifications and print PASS/FAIL lines")
    plot = sub.add_parser("plot", help="render a plot from records.csv")
    plot.add_argument("csv")
    plot.add_argument("spec", help="lineplot:<y>-vs-<x>[:<series>][:logx] or boxplot:<value>-by-<f1>[,<f2>]")
    plot.add_argument("--out", default=None, help="output SVG path")
    return parser


def _cmd_run(args) -> int:
    from .experiments import ConfigError, ExperimentConfig, run_experiment

    try:
        cfg = ExperimentConfig.from_toml(args.config)
        seed = os.environ.get("M3VB_SEED")
        if seed is not None:
            try:
                cfg = dataclasses.replace(cfg, base_seed=int(seed))
            except ValueError:
                raise ConfigError(f"M3VB_SEED must be an integer, got {seed!r}") from None
        if args.full:
            cfg = cfg.with_full_grids()
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as exc:
        print(f"m3vb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    try:
        records = run_experiment(cfg, workers=args.workers, output_dir=out)
    except Exception as exc:
        print(f"m3vb: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = sum(r.status != "ok" for r in records)
    print(f"wrote {len(records)} records ({failed} failed) to {out / 'records.csv'}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from .checks import run_all

    try:
        results = run_all()
    except Exception as exc:
        print(f"m3vb: check crashed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def _cmd_plot(args) -> int:
    from .experiments import read_records
    from .plotting import parse_plot_spec, render_spec

    try:
        parse_plot_spec(args.spec)
    except ValueError as exc:
        print(f"m3vb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        records = read_records(args.csv)
    except (OSError, ValueError) as exc:
        print(f"m3vb: cannot read {args.csv}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        path = render_spec(records, args.spec, Path(args.csv).parent, path=args.out)
    except ValueError as exc:
        print(f"m3vb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"m3vb: plot failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    handler = {"run": _cmd_run, "check": _cmd_check, "plot": _cmd_plot}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
