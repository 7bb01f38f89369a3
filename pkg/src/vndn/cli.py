"""Command-line front end: run scenarios, generate them from templates, and
re-derive reports from saved event logs.

Exit codes: 0 success, 2 bad input (parse/validation/params), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .engine import run_scenario, write_events
from .geo import RoadGraphError
from .mobility import TraceFormatError
from .scenario import (
    ScenarioParseError,
    ScenarioValidationError,
    load_scenario,
    save_scenario,
)
from .stats import MalformedLogError, aggregate, read_events, stats_to_dict, write_report
from .templates import TEMPLATES, BadParamsError, gen_scenario

_INPUT_ERRORS = (
    ScenarioParseError,
    ScenarioValidationError,
    BadParamsError,
    RoadGraphError,
    TraceFormatError,
    MalformedLogError,
    FileNotFoundError,
)


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise BadParamsError(f"expected key=value, got {pair!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    events_path = os.path.join(args.out, "events.ndjson")
    write_events(result.records, events_path)
    stats_path = os.path.join(args.out, "stats.json")
    with open(stats_path, "w") as fh:
        json.dump(stats_to_dict(result.stats), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"{scenario.name}: {len(result.records)} events, "
        f"{result.stats.satisfied}/{result.stats.requests} requests satisfied, "
        f"digest {result.digest}"
    )
    return 0


def _cmd_gen(args) -> int:
    scenario = gen_scenario(args.template, _parse_params(args.param))
    save_scenario(scenario, args.out)
    print(f"wrote {args.out} ({scenario.name}, {len(scenario.nodes)} nodes)")
    return 0


def _cmd_report(args) -> int:
    stats = aggregate(read_events(args.log))
    for path in write_report(stats, args.format, args.out):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vndn",
        description="Vehicular named-data networking simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario file")
    run.add_argument("--scenario", required=True, help="scenario JSON path")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(fn=_cmd_run)

    gen = sub.add_parser("gen", help="generate a scenario from a template")
    gen.add_argument("--template", required=True, choices=TEMPLATES)
    gen.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="template parameter override (repeatable)",
    )
    gen.add_argument("--out", required=True, help="scenario JSON path to write")
    gen.set_defaults(fn=_cmd_gen)

    report = sub.add_parser("report", help="aggregate a saved event log")
    report.add_argument("--log", required=True, help="events.ndjson path")
    report.add_argument("--format", choices=("json", "csv"), default="json")
    report.add_argument("--out", required=True, help="output directory")
    report.set_defaults(fn=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
