"""Command line entry point: ``moller <suite> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SUITES, ConfigParseError, ConfigValidationError, parse_config
from .runner import plan, run_scenario

COMMANDS = (*SUITES, "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moller", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "verify-operators": "lattice operator identities, causality, time slice, symplectic form",
        "solve-modes": "mode battery: Wronskian, WKB bound, energy, Dyson series, Bogoliubov decay",
        "deform-state": "deformed two-point function, CCR and positivity, lattice cross-check, Hadamard proxy",
        "adiabatic-sweep": "convergence of the deformed state as the ramp is stretched",
        "check-spectral-condition": "integrability of 1/lambda near zero for the configured measure",
        "report": "every suite listed in the scenario",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="scenario file (INI format, see docs/formats.md)")
        p.add_argument("--out", help="output directory (default: output.dir from the scenario)")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan without computing")
        p.add_argument("-v", "--verbose", action="store_true", help="log suite progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = parse_config(args.config)
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        scenario = scenario.with_output(args.out)
    suites = list(scenario.scenario.suites) if args.command == "report" else [args.command]
    if args.dry_run:
        print(plan(scenario, suites))
        return 0
    result = run_scenario(scenario, suites, scenario.output.dir)
    print(f"report: {scenario.output.dir}/report.txt")
    for suite in result.suites:
        print(f"{'PASS' if suite.passed else 'FAIL'} {suite.suite}")
    return result.exit_status


if __name__ == "__main__":
    sys.exit(main())
