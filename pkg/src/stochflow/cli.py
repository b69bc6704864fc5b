"""Command-line front end.

Exit codes: 0 all hard verdicts pass, 1 usage/config error, 2 verdict failure.
Worker count may be overridden by the STOCHFLOW_WORKERS environment variable;
everything else is config-only.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import EXPERIMENTS, ConfigError, load_config, validate_file


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that raises instead of calling sys.exit(2)."""

    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="stochflow",
        description=(
            "Simulate regularized stochastic flows and verify their moment "
            "bounds, convergence and homeomorphism diagnostics."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in EXPERIMENTS + ("validate",):
        p = sub.add_parser(name, help=f"run the {name} experiment" if name != "validate"
                           else "check a config file without executing")
        p.add_argument("--config", required=True, help="YAML experiment configuration")
        if name != "validate":
            p.add_argument("--out", default=None, help="output directory override")
            p.add_argument("--workers", type=int, default=None, help="worker pool size")
    return parser


def _resolve_workers(cli_value, cfg_value: int) -> int:
    env = os.environ.get("STOCHFLOW_WORKERS")
    if cli_value is not None:
        return cli_value
    if env is not None:
        return int(env)
    return cfg_value


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1

    if args.command == "validate":
        diags = validate_file(args.config)
        for d in diags:
            print(d, file=sys.stderr)
        return 1 if diags else 0

    try:
        cfg = load_config(args.config, experiment=args.command)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return 1

    workers = _resolve_workers(args.workers, cfg.workers)
    if workers < 1:
        print("error: workers must be >= 1", file=sys.stderr)
        return 1
    cfg = replace(cfg, workers=workers)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)

    from .experiments import run_experiment

    try:
        outcome = run_experiment(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, ok in outcome.report["hard_verdicts"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for path in outcome.files:
        print(f"wrote {path}")
    return 0 if outcome.hard_pass else 2


if __name__ == "__main__":
    raise SystemExit(main())
