"""nsalpha <simulate|optimize|sweep-alpha|verify> --config PATH [--out DIR] [--seed N] [--threads N]

Exit codes: 0 success, 1 invalid configuration or arguments, 2 solver or
I/O failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import scipy.fft

from .config import MODES, ConfigError, default_config_text, load_config, parse_config
from .optimize import StagnationError
from .runner import SolverFailure, run
from .state import BlowUpError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsalpha", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", type=Path, help="YAML run configuration (default: built-in example)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed for every random draw (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="FFT workers and concurrent sweep rows")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    overrides = {"mode": args.mode}
    if args.out is not None:
        overrides["output"] = str(args.out)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        if args.config is None:
            cfg, base = parse_config(default_config_text(), ".", overrides), Path(".")
        else:
            cfg, base = load_config(args.config, overrides), args.config.parent
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG

    try:
        with scipy.fft.set_workers(args.threads):
            outcome = run(cfg, args.mode, base, args.threads)
    except (BlowUpError, StagnationError, SolverFailure) as exc:
        print(f"solver failure in {args.mode}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O failure in {args.mode}: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    print(outcome.summary)
    if not outcome.ok:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
