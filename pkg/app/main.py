# Entrypoint for the workbench command-line interface

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from app.api.commands import CommandResult, run_command, verdict_mismatch
from app.core.config import Command, ReportFormat, RunConfig, config_digest, get_settings, parse_config
from app.core.errors import WorkbenchError
from app.core.logging_config import setup_logging
from app.core.serialization import to_jsonable
from app.services.registry import RunRecord, RunRegistry, append_run
from app.services.reports import emit_report

logger = logging.getLogger(__name__)


# ================================
# ARGUMENTS
# ================================

def _flag(parser: argparse.ArgumentParser, *names: str, **kwargs) -> None:
    # every flag defaults to None so that config-file values survive
    parser.add_argument(*names, default=None, **kwargs)


def _common_arguments(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--config", dest="config_file", help="YAML or JSON run config; flags override it")
    _flag(parser, "--ground", help="int:LO..HI, fp:P or qgrid:MAXNUM/MAXDEN")
    _flag(parser, "--colors", "-n", type=int, help="number of colors")
    _flag(parser, "--seed", type=int)
    _flag(parser, "--format", choices=[f.value for f in ReportFormat])
    _flag(parser, "--report", help="write the report here instead of standard output")
    _flag(parser, "--registry", help="runs file (default from WORKBENCH_REGISTRY)")
    _flag(parser, "--workers", type=int)
    _flag(parser, "--log-level", dest="log_level")
    _flag(parser, "--log-file", dest="log_file")


def _template_arguments(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--template", help="schur, moreira, quad, quad_ap or a library name")
    _flag(parser, "--template-file", dest="template_file")
    _flag(parser, "--k", type=int, help="term count for quad_ap")
    _flag(parser, "--distinct", action="store_const", const=True, help="require pairwise distinct term values")


def _method_arguments(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--method", help="exhaustive, sat or sat_external")
    _flag(parser, "--max-decisions", dest="max_decisions", type=int)
    _flag(parser, "--expect", choices=["avoiding", "forced"])


def _coloring_arguments(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--coloring", help="random, mono, residue or file:PATH")


def _structure_arguments(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--width", "-f", type=int, help="syndetic width bound")
    _flag(parser, "--thick-generators", dest="thick_generators", type=int)
    _flag(parser, "--thick-progression", dest="thick_progression", type=int)
    _flag(parser, "--r", type=int, help="IP rank")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="workbench",
        description="Search and certificate workbench for monochromatic sum-product patterns",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    search = sub.add_parser(Command.SEARCH.value, help="decide whether some coloring avoids the template")
    for add in (_common_arguments, _template_arguments, _method_arguments):
        add(search)
    _flag(search, "--cnf-out", dest="cnf_out")
    _flag(search, "--model-file", dest="model_file")
    _flag(search, "--solver-cmd", dest="solver_cmd")

    count = sub.add_parser(Command.COUNT.value, help="count monochromatic instances under a coloring")
    for add in (_common_arguments, _template_arguments, _coloring_arguments):
        add(count)
    _flag(count, "--limit", type=int, help="also list the first LIMIT instances")

    threshold = sub.add_parser(Command.THRESHOLD.value, help="scan interval sizes or primes for the Forced boundary")
    for add in (_common_arguments, _template_arguments, _method_arguments):
        add(threshold)
    _flag(threshold, "--max-n", dest="max_n", type=int)
    _flag(threshold, "--min-n", dest="min_n", type=int)
    _flag(threshold, "--primes", help="A..B or p1,p2,...")
    _flag(threshold, "--no-bisect", dest="bisect", action="store_const", const=False)

    analyze = sub.add_parser(Command.ANALYZE.value, help="IP_r*, syndetic and thick certificates per color class")
    for add in (_common_arguments, _coloring_arguments, _structure_arguments):
        add(analyze)

    cover = sub.add_parser(Command.COVER.value, help="build and verify the cover decomposition")
    for add in (_common_arguments, _coloring_arguments, _structure_arguments):
        add(cover)
    _flag(cover, "--trace-out", dest="trace_out")

    walk = sub.add_parser(Command.WALK.value, help="run the density walk for {x, y, xy, x+y}")
    for add in (_common_arguments, _coloring_arguments, _structure_arguments):
        add(walk)
    _flag(walk, "--N", dest="N", type=int, help="walk length")
    _flag(walk, "--s", type=int)
    _flag(walk, "--alpha-floor", dest="alpha_floor")
    _flag(walk, "--restarts", type=int)
    _flag(walk, "--walk", choices=["general", "two-class"])
    _flag(walk, "--distinct", action="store_const", const=True)
    _flag(walk, "--trace-out", dest="trace_out")

    export = sub.add_parser(Command.EXPORT_CNF.value, help="write the DIMACS avoidance formula")
    for add in (_common_arguments, _template_arguments):
        add(export)
    _flag(export, "--cnf-out", dest="cnf_out")

    runs = sub.add_parser("runs", help="summarize the run registry")
    _flag(runs, "--registry")
    _flag(runs, "--log-level", dest="log_level")
    _flag(runs, "--log-file", dest="log_file")
    runs.add_argument("--hours", type=int, default=24)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    flags: Dict[str, Any] = {name: value for name, value in vars(args).items() if name in RunConfig.model_fields}
    return parse_config(args.config_file, flags)


# ================================
# OUTPUT
# ================================

def _print_result(config: RunConfig, result: CommandResult) -> None:
    data = emit_report(result.rows, config.format, config.report, title=f"{config.command.value}: {result.verdict}")
    if config.report:
        result.artifacts.append(config.report)
    if config.format is ReportFormat.PRETTY or config.report:
        for line in result.lines:
            print(line)
    if not config.report:
        sys.stdout.write(data.decode("utf-8"))


def _record(config: RunConfig, result: CommandResult) -> None:
    record = RunRecord(
        command=config.command.value,
        config_digest=config_digest(config),
        verdict=result.verdict,
        elapsed_seconds=round(result.seconds, 6),
        summary=to_jsonable(result.summary),
        artifacts=list(result.artifacts),
    )
    append_run(record, config.registry or get_settings().registry)


def show_runs(registry_path: str, hours: int) -> int:
    registry = RunRegistry(registry_path)
    stats = registry.statistics()
    print(json.dumps(stats, indent=2, sort_keys=True))
    for record in registry.recent(hours):
        print(f"{record.timestamp}  {record.command:<10}  {record.verdict:<24}  {record.elapsed_seconds:.3f}s  "
              f"{record.config_digest[:12]}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or get_settings().log_level, args.log_file)

    if args.command == "runs":
        return show_runs(args.registry or get_settings().registry, args.hours)

    try:
        config = config_from_args(args)
        result = run_command(config)
        _print_result(config, result)
        _record(config, result)
    except WorkbenchError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    mismatch = verdict_mismatch(config, result)
    if mismatch:
        print(f"error: {mismatch}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
