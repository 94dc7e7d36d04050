"""Command-line entry point: ``dispersion-chain {state,evolve,check,report}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import parse_config
from .errors import ChainError, ConfigurationError, StepSizeError
from .runner import run

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL_GUARD = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispersion-chain", description="Evolve and diagnose phase-space distribution chains.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("state", "write the initial state and its sign diagnostics"),
        ("evolve", "evolve the state and dump snapshots plus a time series"),
        ("check", "evaluate residuals of the requested equations"),
        ("report", "write H, f0, negative-mass and dissipation series"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", type=Path, help="JSON configuration file")
        cmd.add_argument("--out", type=Path, help="output directory (overrides the config)")
        cmd.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="set a configuration entry, e.g. state.n=1 or dt=0.01 (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    try:
        config = parse_config(text, args.override)
        summary = run(config, args.command, args.out)
    except StepSizeError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_GUARD
    except (ConfigurationError, ChainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, sort_keys=True))
    return EXIT_CHECK_FAILED if summary.get("failed") else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
