"""Command-line entry point.  Exit status: 0 all pass, 1 any failure, 2 configuration error."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..fields import FieldError
from ..sphere import nu_solve, write_nu_solution
from .config import ConfigError, load_config
from .report import emit_report
from .suites import SUITES, run_suite

COMMANDS = {
    "verify-expansion": "expansion-validate",
    "first-variation": "first-variation",
    "second-variation": "second-variation",
    "symbol-check": "symbol-check",
    "nu-solve": "nu-solve",
    "report": None,  # suite chosen by --suite (default: all)
}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paneitzlab", description="Verification suites for the Paneitz toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    common.add_argument("--out", help="report directory (overrides the config)")
    common.add_argument("--suite", help=f"suite id for 'report': one of {', '.join(SUITES)} or all")
    common.add_argument("--tol-scale", type=float, help="multiply every tolerance by this factor")
    common.add_argument("--pole", help="nu-solve: also solve and serialize at this pole (N, S or 'x,y,z')")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_pole(text: str):
    """'N', 'S' or a chart 3-vector 'x,y,z'."""
    key = text.strip().upper()
    if key in ("N", "S"):
        return key
    try:
        v = [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad pole {text!r}") from exc
    if len(v) != 3:
        raise ConfigError(f"pole {text!r} must be N, S or three chart coordinates")
    return v


def _resolve(args):
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["output"] = args.out
    if args.tol_scale is not None:
        over["tol_scale"] = args.tol_scale
    cfg = cfg.replace(**over) if over else cfg
    suite = COMMANDS[args.command]
    if suite is None:
        suite = args.suite or "all"
    elif args.suite is not None and args.suite != suite:
        raise ConfigError(f"--suite {args.suite} conflicts with subcommand {args.command}")
    if suite != "all" and suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}")
    if args.pole is not None and args.command != "nu-solve":
        raise ConfigError("--pole only applies to nu-solve")
    if args.pole is not None:
        parse_pole(args.pole)
    return cfg, suite


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg, suite = _resolve(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(cfg, suite)
    try:
        paths = emit_report(report, Path(cfg.output))
        if args.pole is not None:
            sol = nu_solve(parse_pole(args.pole), cfg.truncation)
            write_nu_solution(sol, Path(cfg.output))
            print(f"nu({args.pole}) = {sol.nu:.6g}, alpha = {sol.alpha:.6g}, L = {sol.L}")
    except FieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for e in report.entries:
        print(f"{'PASS' if e.passed else 'FAIL'} {e.check} [{e.anchor}] value={e.value:.6g} "
              f"expected={e.expected:.6g} tol={e.tolerance:.3g}")
    if report.failures:
        print("\nfailures:", file=sys.stderr)
        for e in report.failures:
            budget = ", ".join(f"{k}={v:.3g}" for k, v in sorted(e.budget.items())) or "none"
            print(f"  {e.check}: anchor {e.anchor}; budget {budget}; {e.message}".rstrip("; "), file=sys.stderr)
    print(f"{len(report.entries) - len(report.failures)}/{len(report.entries)} passed; report in {paths[0].parent}")
    return EXIT_FAIL if report.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
