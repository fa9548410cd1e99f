"""Command-line experiment runner.

Usage:
    hyperadams run <config-file> [--out DIR] [--threads T]
    hyperadams converge <config-file> [--out DIR] [--threads T]

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 non-convergence.  HYPERADAMS_THREADS is the fallback for --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import ConfigError, DiscretizationError, NonFiniteSampleError
from .experiments import convergence_study, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGENCE = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperadams",
        description="Numerical experiments for sharp exponential-class "
        "inequalities on the hyperbolic ball",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run one experiment from a config file"),
        ("converge", "run a refinement study of an experiment"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a key = value config file")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads for independent rows "
            "(default: HYPERADAMS_THREADS or 1)",
        )
    return parser


def _resolve_threads(arg_value) -> int:
    if arg_value is not None:
        return max(1, int(arg_value))
    env = os.environ.get("HYPERADAMS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HYPERADAMS_THREADS={env!r} is not an integer")
    return 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output or "."
    try:
        if args.command == "run":
            report = run_experiment(cfg, threads=threads)
        else:
            report = convergence_study(cfg, threads=threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DiscretizationError, NonFiniteSampleError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    csv_path, json_path = report.write(out_dir)
    print(f"wrote {csv_path} and {json_path} ({report.wall_time_s:.2f}s)")
    if cfg.experiment == "solve-pde" and not report.diagnostics.get("converged", True):
        print("solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.command == "converge" and not report.diagnostics.get("passed", True):
        print("convergence study below documented order", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
