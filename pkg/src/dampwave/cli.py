"""Command-line runner: ``dampwave run <preset|config-path> [options]``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 on
numerical failure.
"""

import argparse
import logging
import os
import sys

from .experiments import ConfigError, PRESETS, load_preset, read_config, run_sweep
from .expressions import ExpressionError
from .linalg import ConvergenceError
from .stepper import NumericalError

USAGE_ERROR = 1
NUMERICAL_ERROR = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"N values must be positive, got {text!r}")
    return values


def _window(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    if not lo < hi:
        raise argparse.ArgumentTypeError("window needs lo < hi")
    return lo, hi


def build_parser():
    parser = _Parser(prog="dampwave", description="Damped wave equation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run a preset or a config file",
                       description=f"Presets: {', '.join(PRESETS)}.")
    r.add_argument("target", help="preset name or path to a config file")
    r.add_argument("--N", type=_int_list, help="comma-separated mesh resolutions")
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--delta", type=float, help="set (alpha, beta) from a target decay rate")
    r.add_argument("--k", type=float, help="time step (default h^2)")
    r.add_argument("--T", type=float, help="final time")
    r.add_argument("--window", type=_window, help="decay-fit window 'lo,hi'")
    r.add_argument("--out", help="output directory")
    sub.add_parser("presets", help="list presets")
    return parser


def _load(target):
    if target in PRESETS:
        return load_preset(target)
    if os.path.isfile(target):
        return read_config(target)
    raise UsageError(f"{target!r} is neither a preset ({', '.join(PRESETS)}) nor a file")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        for name, info in PRESETS.items():
            print(f"{name:10s} {info['description']}")
        return 0

    try:
        if args.T is not None and args.T <= 0:
            raise UsageError(f"--T must be positive, got {args.T}")
        if args.k is not None and args.k <= 0:
            raise UsageError(f"--k must be positive, got {args.k}")
        if args.delta is not None and args.delta <= 0:
            raise UsageError(f"--delta must be positive, got {args.delta}")
        if args.beta is not None and args.beta < 0:
            raise UsageError(f"--beta must be nonnegative, got {args.beta}")
        problem = _load(args.target)
        problem = problem.with_overrides(alpha=args.alpha, beta=args.beta, delta=args.delta,
                                         k=args.k, T=args.T, window=args.window)
    except (UsageError, ConfigError, ExpressionError) as exc:
        print(f"dampwave: error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    try:
        result = run_sweep(problem, args.N, args.out)
    except ConfigError as exc:
        print(f"dampwave: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (NumericalError, ConvergenceError, FloatingPointError) as exc:
        step = getattr(exc, "step", None)
        where = f" (step {step})" if step is not None else ""
        print(f"dampwave: numerical failure{where}: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR

    for path in result.files:
        print(path)
    summary = result.files[-1]
    with open(summary) as fh:
        sys.stdout.write(fh.read())
    return 0


if __name__ == "__main__":
    sys.exit(main())
