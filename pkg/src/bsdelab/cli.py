"""Command-line entry point: ``bsdelab <subcommand> --config FILE --seed N --out DIR``."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import BSDELabError, DivergedError, InvalidConfigError, NumericOverflowError, RegressionSingularError
from .harness import EXIT_INVARIANT, EXIT_NONCONVERGED, RULES, SUBCOMMANDS, run_scenario, run_verify


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _deltas(text: str) -> list:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--deltas expects comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsdelab", description="Monte Carlo laboratory for BSDEs with jumps, "
                                     "delayed generators, reflection, optimal stopping and robust games.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify", help="scenario YAML file")
        p.add_argument("--seed", type=_seed, default=None, help="master seed (overrides run.seed)")
        p.add_argument("--out", required=True, help="output root directory")
        if name != "verify":
            p.add_argument("--sigma", type=float, default=None, help="evaluation time on the grid")
            p.add_argument("--epsilon", type=float, default=None, help="epsilon of D^eps")
        if name == "stop":
            p.add_argument("--rule", choices=RULES, default="tau_star")
        if name == "robust":
            p.add_argument("--deltas", type=_deltas, default=None, help="comma-separated ambiguity parameters")
            p.add_argument("--family", default=None, help="generator kind of the family")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "verify" and args.config is None:
            report = run_verify(args.out, 0 if args.seed is None else args.seed)
        else:
            cfg = load_config(args.config)
            extra = {}
            if args.subcommand == "stop":
                extra["rule"] = args.rule
            if args.subcommand == "robust":
                extra.update(deltas=args.deltas, family=args.family)
            if args.subcommand != "verify":
                extra.update(sigma=args.sigma, epsilon=args.epsilon)
            report = run_scenario(cfg, args.subcommand, args.out, seed=args.seed, **extra)
    except InvalidConfigError as exc:
        print(f"bsdelab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DivergedError, NumericOverflowError, RegressionSingularError) as exc:
        print(f"bsdelab: solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except BSDELabError as exc:
        print(f"bsdelab: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for line in report.summary.get("rows", []):
        print(line)
    failed = [k for k, v in report.checks.items() if not v]
    print(f"{report.subcommand}: wrote {report.out_dir}")
    if failed:
        print("failed checks: " + "; ".join(failed), file=sys.stderr)
    if report.nonconverged:
        print(f"{report.nonconverged} solve(s) did not reach the Picard tolerance", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
