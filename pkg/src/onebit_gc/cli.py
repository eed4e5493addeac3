"""Command-line entry point: ``onebit-gc {run,bounds,verify}``.

Exit codes: 0 success, 1 runtime failure (including unpermitted divergence),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigParseError, IngestionError, InvalidConfigError, InvalidInputError
from .experiment import parse_bounds_config, parse_config, run_bounds, run_experiment

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _read_config(parser: argparse.ArgumentParser, path: str) -> str:
    p = Path(path)
    if not p.is_file():
        parser.error(f"config file not found: {path}")
    return p.read_text(encoding="utf-8")


def _cmd_run(args, parser) -> int:
    text = _read_config(parser, args.config)
    try:
        cfg = parse_config(text)
    except (ConfigParseError, InvalidConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seeds = [args.seed]
    log = None if args.quiet else print
    try:
        result = run_experiment(cfg, args.out, log=log)
    except (IngestionError, OSError, InvalidInputError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.exit_code and not args.quiet:
        print("one or more runs diverged (set allow_divergence = true to accept)", file=sys.stderr)
    return result.exit_code


def _cmd_bounds(args, parser) -> int:
    text = _read_config(parser, args.config)
    try:
        params, spec, Ts, out = parse_bounds_config(text)
    except (ConfigParseError, InvalidConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    path = Path(args.out) if args.out else Path(out)
    try:
        rows = run_bounds(params, spec, Ts, path)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.quiet:
        for row in rows:
            print(f"{row['bound']:<14} T={row['T']!s:<10} {row['value']:.6e}")
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify(args, parser) -> int:
    from .verify import run_all

    results = run_all(seed=args.seed or 0)
    for name, ok, detail in results:
        if not args.quiet or not ok:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the seed list with one seed")
    common.add_argument("--out", default=None, help="output directory (run) or CSV path (bounds)")
    common.add_argument("--quiet", action="store_true", help="only print failures")

    parser = argparse.ArgumentParser(prog="onebit-gc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run an experiment config")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run, subparser=p_run)
    p_bounds = sub.add_parser("bounds", parents=[common], help="evaluate convergence bounds")
    p_bounds.add_argument("config")
    p_bounds.set_defaults(func=_cmd_bounds, subparser=p_bounds)
    p_verify = sub.add_parser("verify", parents=[common], help="run the oracle self-checks")
    p_verify.set_defaults(func=_cmd_verify, subparser=p_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, args.subparser)


if __name__ == "__main__":
    sys.exit(main())
