"""Command-line runner.

Exit status: 0 when every assertion and comparison passes, 2 when an
assertion or comparison fails, 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import AssertionFailed, SimulationError
from .report import FORMATTERS
from .scenarios import BUILTINS, builtin, run_scenario
from .script import load_script

log = logging.getLogger("hangon")

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _param(text: str) -> tuple[str, object]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hangon", description="Run observer-relative measurement scenarios.")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", choices=sorted(BUILTINS))
    source.add_argument("--script", type=Path, help="JSON or YAML scenario script")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="built-in scenario parameter (value parsed as JSON when possible)")
    p.add_argument("--trials", type=_positive, default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--format", choices=sorted(FORMATTERS), default="json")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--agent", action="append", help="only report this agent (repeatable)")
    p.add_argument("--audit", choices=("consol", "absolute"))
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--no-timestamp", action="store_true")
    modes = p.add_mutually_exclusive_group()
    modes.add_argument("--oracle-only", action="store_true", help="skip Monte-Carlo sampling")
    modes.add_argument("--engine-only", action="store_true", help="skip oracle comparisons")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.script is not None:
            if args.param:
                raise SimulationError("--param applies to built-in scenarios only")
            script = load_script(args.script)
        else:
            script = builtin(args.scenario, dict(args.param))
        unknown = set(args.agent or ()) - set(script.agents)
        if unknown:
            raise SimulationError(f"unknown agents {sorted(unknown)}")
        if args.audit and script.name != "frauchiger_renner":
            raise SimulationError("--audit needs the frauchiger_renner scenario")
        if args.audit and args.oracle_only:
            raise SimulationError("--audit needs sampled transcripts; drop --oracle-only")
    except (SimulationError, OSError, ValueError) as exc:
        print(f"hangon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    log.info("running %s: %d trials, seed %d", script.name, args.trials, args.seed)
    try:
        report = run_scenario(
            script,
            args.trials,
            args.seed,
            jobs=args.jobs,
            engine=not args.oracle_only,
            oracle=not args.engine_only,
            audit=args.audit,
            timestamp=not args.no_timestamp,
        )
    except AssertionFailed as exc:
        print(f"hangon: assertion failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except SimulationError as exc:
        print(f"hangon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    text = FORMATTERS[args.format](report, args.agent)
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    for check in report.checks:
        if not check.passed:
            print(f"hangon: check failed: {check.name} {check.detail}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
