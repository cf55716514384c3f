"""Command line entry point: ``brownchain run|describe|version``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import ExperimentConfig, load_config, with_overrides
from .errors import ConfigurationError


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brownchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run an experiment and write its artifacts"), ("describe", "print the plan without computing")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="experiment configuration (INI)")
        p.add_argument("--out", help="output directory (overrides [experiment] output)")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the file)")
        p.add_argument("--workers", type=int, help="worker processes for replications")
        if name == "run":
            p.add_argument("--svg", action="store_true", help="also render SVG plots")
    sub.add_parser("version", help="print the package version")
    return parser


def _resolve(args) -> ExperimentConfig:
    config = load_config(args.config)
    return with_overrides(config, output=args.out, seed=args.seed, workers=args.workers)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    if args.command == "version":
        print(__version__)
        return 0
    from .experiment import describe, run

    try:
        config = _resolve(args)
        if args.command == "describe":
            sys.stdout.write(describe(config))
            return 0
        code, report = run(config, svg=args.svg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for s in report.statistics:
        if s.verdict != "INFO":
            print(f"{s.verdict:12s} {s.name}" + (f" (d={s.d})" if s.d is not None else "") + f" = {s.value:.6g}")
    print(f"{'PASS' if code == 0 else 'FAIL'}: artifacts in {config.output}")
    return code


if __name__ == "__main__":
    sys.exit(main())
