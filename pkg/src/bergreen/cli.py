"""Command line front end: ``bergreen <experiment> --config cfg.json [...]``.

Writes ``report.json`` plus CSV data files into the output directory and
prints one line per pass/fail check.  Exit status is 0 when every check
passed, 1 when any failed, and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import BergreenError, ConfigError
from .harness import EXPERIMENTS, PRIMARY_TOLERANCE, ExperimentConfig, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bergreen",
        description="Weighted Bergman kernel / Green's function verification experiments.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, type=Path, help="JSON experiment config")
    parser.add_argument("--out", type=Path, default=Path("bergreen-out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--points", type=int, default=None, help="override the random point count")
    parser.add_argument("--tol", type=float, default=None,
                        help="override the experiment's primary tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExperimentConfig.from_json(args.config)
        config.experiment = args.experiment
        if args.seed is not None:
            config.seed = args.seed
        if args.points is not None:
            config.count = args.points
        if args.tol is not None:
            config.tolerances = dict(config.tolerances)
            config.tolerances[PRIMARY_TOLERANCE[args.experiment]] = args.tol
        config.validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run(config, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BergreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for check in report.checks:
        print(check.line())
    for note in report.notes:
        print(f"[NOTE] {note}")
    print(f"report written to {args.out / 'report.json'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
