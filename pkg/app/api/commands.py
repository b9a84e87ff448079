"""
Command handlers: one per CLI subcommand.

Each handler takes a validated RunConfig and returns a CommandResult holding
the verdict, a JSON-ready summary, report rows and any artifact paths written.
"""

import json
import logging
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import Command, RunConfig, get_settings, parse_primes
from app.core.errors import ConfigError, InternalVerificationError
from app.core.serialization import to_jsonable
from app.models.coloring import Coloring, make_coloring
from app.models.ground import GroundSet, IntegerInterval, parse_ground
from app.models.templates import PatternTemplate, resolve_template
from app.services.avoidance import (
    AvoidanceResult, ExternalSolver, Method, ThresholdScan, Verdict, avoidance_search, field_threshold, threshold_scan,
)
from app.services.cnf import encode_cnf, write_dimacs
from app.services.cover import cover_decomposition, verify_cover
from app.services.reports import ReportRow
from app.services.search import count_monochromatic, find_instances
from app.services.structure import (
    ThickTestFamily, default_ambient, default_thick_family, is_ipr_star, is_syndetic, is_thick,
)
from app.services.trace_check import check_success, check_trace
from app.services.walker import WalkParams, WalkSuccess, walk_claim_thick, walk_theorem_m2

logger = logging.getLogger(__name__)


class CommandResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: Command
    verdict: str
    summary: Dict[str, Any] = Field(default_factory=dict)
    rows: List[ReportRow] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)
    lines: List[str] = Field(default_factory=list, description="human-readable notes for stdout")
    seconds: float = 0.0
    timestamp: datetime = Field(default_factory=datetime.now)


# ================================
# SHARED HELPERS
# ================================

def _template(config: RunConfig) -> PatternTemplate:
    return resolve_template(config.template, config.k, config.distinct, config.template_file)


def _coloring(config: RunConfig, ground: GroundSet) -> Coloring:
    return make_coloring(config.coloring, ground, config.colors, config.seed)


def _thick_family(config: RunConfig, ground: GroundSet) -> ThickTestFamily:
    return default_thick_family(default_ambient(ground), config.width, ground,
                                config.thick_generators, config.thick_progression)


def _avoidance_row(result: AvoidanceResult) -> ReportRow:
    return ReportRow(result.ground, result.n, result.template, result.method.value,
                     result.verdict.value, result.instance_sets, result.seconds)


def _write_json(path: str, payload: Any) -> str:
    try:
        Path(path).write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ConfigError("output", f"cannot write {path}: {e}")
    logger.info(f"Wrote {path}")
    return path


# ================================
# SEARCH / COUNT / EXPORT
# ================================

def run_search(config: RunConfig) -> CommandResult:
    ground = parse_ground(config.ground)
    template = _template(config)
    method = Method(config.method)
    external = None
    if method is Method.SAT_EXTERNAL:
        if not config.cnf_out:
            raise ConfigError("cnf_out", "sat_external needs --cnf-out")
        external = ExternalSolver(config.cnf_out, config.model_file, config.solver_cmd)

    result = avoidance_search(ground, config.colors, template, method,
                              budget=get_settings().exhaustive_budget, workers=config.workers,
                              max_decisions=config.max_decisions, external=external)
    summary = {
        "ground": result.ground,
        "template": result.template,
        "colors": result.n,
        "method": result.method.value,
        "verdict": result.verdict.value,
        "instance_sets": result.instance_sets,
        "solver": result.stats,
        "externally_certified": result.externally_certified,
        "coloring": list(result.coloring.colors) if result.coloring else None,
    }
    artifacts = [config.cnf_out] if external else []
    if external and config.model_file:
        artifacts.append(config.model_file)
    lines = [f"{result.template} on {result.ground}, {result.n} colors: {result.verdict.value}"]
    if result.coloring is not None:
        lines.append(f"classes: {[sorted(c) for c in result.coloring.classes]}")
    return CommandResult(command=Command.SEARCH, verdict=result.verdict.value, summary=summary,
                         rows=[_avoidance_row(result)], artifacts=artifacts, lines=lines)


def run_count(config: RunConfig) -> CommandResult:
    ground = parse_ground(config.ground)
    template = _template(config)
    coloring = _coloring(config, ground)
    started = time.perf_counter()
    counts = count_monochromatic(coloring, template)
    seconds = time.perf_counter() - started

    rows = [ReportRow(ground.spec, coloring.n, template.label, "count", f"color {c}", count, seconds)
            for c, count in enumerate(counts.per_color)]
    rows.append(ReportRow(ground.spec, coloring.n, template.label, "count", "total", counts.total, seconds))
    sample = find_instances(coloring, template, limit=config.limit) if config.limit else []
    summary = {
        "ground": ground.spec,
        "template": template.label,
        "coloring": config.coloring,
        "per_color": list(counts.per_color),
        "total": counts.total,
        "instances": [{"assignment": i.assignment, "values": i.term_values, "color": c} for i, c in sample],
    }
    verdict = Verdict.AVOIDING.value if counts.total == 0 else Verdict.FORCED.value
    lines = [f"{template.label} on {ground.spec}: {counts.total} monochromatic instances {list(counts.per_color)}"]
    return CommandResult(command=Command.COUNT, verdict=verdict, summary=summary, rows=rows, lines=lines)


def run_export_cnf(config: RunConfig) -> CommandResult:
    if not config.cnf_out:
        raise ConfigError("cnf_out", "export-cnf needs --cnf-out")
    ground = parse_ground(config.ground)
    template = _template(config)
    formula = encode_cnf(ground, config.colors, template)
    write_dimacs(formula, config.cnf_out)
    summary = {
        "ground": ground.spec,
        "template": template.label,
        "colors": config.colors,
        "variables": formula.num_vars,
        "clauses": len(formula.clauses),
        "instance_sets": formula.instance_sets,
        "degenerate": formula.degenerate,
    }
    row = ReportRow(ground.spec, config.colors, template.label, "export", "written", len(formula.clauses))
    return CommandResult(command=Command.EXPORT_CNF, verdict="written", summary=summary, rows=[row],
                         artifacts=[config.cnf_out],
                         lines=[f"p cnf {formula.num_vars} {len(formula.clauses)} -> {config.cnf_out}"])


# ================================
# THRESHOLD
# ================================

def run_threshold(config: RunConfig) -> CommandResult:
    template = _template(config)
    method = Method(config.method)
    if method is Method.SAT_EXTERNAL:
        raise ConfigError("method", "threshold scans run the exhaustive or built-in sat method")
    budget = get_settings().exhaustive_budget

    if config.primes:
        primes = parse_primes(config.primes)
        scan = field_threshold(config.colors, template, primes, method, config.workers, budget)
        grounds = {row.N: f"fp:{row.N}" for row in scan.rows}
    else:
        ground = parse_ground(config.ground)
        if not isinstance(ground, IntegerInterval):
            raise ConfigError("ground", "interval scans need an int:LO..HI ground; use --primes for fields")
        max_n = config.max_n if config.max_n is not None else ground.hi
        scan = threshold_scan(ground.lo, max_n, config.colors, template, method,
                              config.min_n, config.bisect, config.workers, budget)
        grounds = {row.N: f"int:{scan.lo}..{row.N}" for row in scan.rows}

    return _scan_result(scan, grounds, template, method, config.colors)


def _scan_result(scan: ThresholdScan, grounds: Dict[int, str], template: PatternTemplate,
                 method: Method, n: int) -> CommandResult:
    rows = []
    for row in scan.rows:
        verdict = row.verdict.value + (" (inferred)" if row.inferred else "")
        result = row.result
        rows.append(ReportRow(grounds[row.N], n, template.label, method.value, verdict,
                              result.instance_sets if result else None,
                              result.seconds if result else None))
    if scan.minimal_forced is None:
        verdict = "no Forced size in range"
    else:
        verdict = f"Forced from {scan.minimal_forced}"
    summary = {
        "template": template.label,
        "colors": n,
        "minimal_forced": scan.minimal_forced,
        "empirical": scan.empirical,
        "verdicts": {str(row.N): row.verdict.value for row in scan.rows},
    }
    lines = [f"{template.label}, {n} colors: {verdict}" + (" (raw per-prime verdicts)" if scan.empirical else "")]
    return CommandResult(command=Command.THRESHOLD, verdict=verdict, summary=summary, rows=rows, lines=lines)


# ================================
# ANALYZE / COVER
# ================================

def run_analyze(config: RunConfig) -> CommandResult:
    ground = parse_ground(config.ground)
    coloring = _coloring(config, ground)
    ambient = default_ambient(ground)
    family = _thick_family(config, ground)
    started = time.perf_counter()

    rows, classes = [], []
    for m, members in enumerate(coloring.classes):
        members = members - {0}
        syndetic = is_syndetic(members, config.width, ambient, ground)
        thick = is_thick(members, family, ambient, ground)
        ipr_star, refutation = is_ipr_star(members, config.r, ambient, ground)
        flags = (f"syndetic={'yes' if syndetic else 'no'} thick={'yes' if thick else 'no'} "
                 f"ip{config.r}*={'yes' if ipr_star else 'no'}")
        certificates = {
            "syndetic_F": syndetic.F if syndetic else None,
            "thick_shifts": {",".join(map(str, sorted(F))): a for F, a in thick.items()} if thick else None,
            "ipr_refutation": refutation.sequence if refutation else None,
        }
        classes.append({"color": m, "size": len(members), "flags": flags, **certificates})
        rows.append(ReportRow(ground.spec, coloring.n, f"class {m}", "analyze", flags, len(members),
                              time.perf_counter() - started, extra={f"class {m}": certificates}))

    summary = {"ground": ground.spec, "coloring": config.coloring, "width": config.width,
               "r": config.r, "thick_family": len(family), "classes": classes}
    lines = [f"color {c['color']} ({c['size']} elements): {c['flags']}" for c in classes]
    return CommandResult(command=Command.ANALYZE, verdict="analyzed", summary=summary, rows=rows, lines=lines)


def run_cover(config: RunConfig) -> CommandResult:
    ground = parse_ground(config.ground)
    coloring = _coloring(config, ground)
    family = _thick_family(config, ground)
    started = time.perf_counter()
    cover = cover_decomposition(coloring, config.width, default_ambient(ground), family)
    problems = verify_cover(coloring, cover, family)
    if problems:
        raise InternalVerificationError(f"cover verification failed: {problems[0]}", payload=problems)
    seconds = time.perf_counter() - started

    rows = [ReportRow(ground.spec, coloring.n, f"Y_{l} = {sorted(Y)}", "cover", "thick",
                      len(cover.union(l, coloring)), seconds)
            for l, Y in enumerate(cover.Ys)]
    artifacts = [_write_json(config.trace_out, cover)] if config.trace_out else []
    lines = [f"k={cover.k}, F={list(cover.F)}, Ys={[sorted(Y) for Y in cover.Ys]}: verified"]
    return CommandResult(command=Command.COVER, verdict="verified", summary=cover.summary(), rows=rows,
                         artifacts=artifacts, lines=lines)


# ================================
# WALK
# ================================

def run_walk(config: RunConfig) -> CommandResult:
    ground = parse_ground(config.ground)
    coloring = _coloring(config, ground)
    params = WalkParams(N=config.N, s=config.s, r=config.r, alpha_floor=config.alpha, seed=config.seed,
                        restarts=config.restarts, distinct=config.distinct)
    started = time.perf_counter()
    if config.walk == "two-class":
        result = walk_claim_thick(coloring, params, _thick_family(config, ground))
    else:
        result = walk_theorem_m2(coloring, params, config.width, _thick_family(config, ground))
    seconds = time.perf_counter() - started

    if isinstance(result, WalkSuccess):
        problems = check_success(coloring, result, config.distinct)
        if problems:
            raise InternalVerificationError(f"walk trace failed the independent check: {problems[0]}",
                                            payload=problems)
        verdict = "Success"
        summary = {"x": result.x, "y": result.y, "color": result.color, "quadruple": result.quadruple,
                   "xs": result.xs, "pair": result.trace.pair, "K": result.trace.K,
                   "degraded": result.trace.degraded, "attempt": result.trace.attempt}
        lines = [f"{{x, y, xy, x+y}} = {result.quadruple} in color {result.color} "
                 f"(pair {result.trace.pair}, attempt {result.trace.attempt})"]
    else:
        if result.trace is not None and check_trace(coloring, result.trace, config.distinct):
            logger.warning(f"Trace of the failed walk does not re-check: {result.stage.value}")
        verdict = result.stage.value
        summary = {"stage": result.stage.value, "step": result.step, "detail": result.detail}
        lines = [f"walk failed at {result.stage.value}" + (f" step {result.step}" if result.step else "")
                 + f": {result.detail}"]

    trace = result.trace
    for step in (trace.steps if trace else []):
        lines.append(f"  j={step.j} |A|={len(step.A)} y={step.y} |Q|={len(step.Q)} |A_next|={len(step.A_next)}")
    artifacts = []
    if config.trace_out and trace is not None:
        artifacts.append(_write_json(config.trace_out, {"result": verdict, "summary": summary, "trace": trace}))
        lines.append(f"trace: {config.trace_out}")

    found = len(result.xs) if isinstance(result, WalkSuccess) else 0
    row = ReportRow(ground.spec, coloring.n, "quad", f"walk:{config.walk}", verdict, found, seconds)
    return CommandResult(command=Command.WALK, verdict=verdict, summary=summary, rows=[row],
                         artifacts=artifacts, lines=lines)


HANDLERS: Dict[Command, Callable[[RunConfig], CommandResult]] = {
    Command.SEARCH: run_search,
    Command.COUNT: run_count,
    Command.THRESHOLD: run_threshold,
    Command.ANALYZE: run_analyze,
    Command.COVER: run_cover,
    Command.WALK: run_walk,
    Command.EXPORT_CNF: run_export_cnf,
}


def run_command(config: RunConfig) -> CommandResult:
    logger.info(f"Running {config.command.value} on {config.ground}")
    started = time.perf_counter()
    result = HANDLERS[config.command](config)
    result.seconds = time.perf_counter() - started
    logger.info(f"{config.command.value} finished: {result.verdict} in {result.seconds:.3f}s")
    return result


def verdict_mismatch(config: RunConfig, result: CommandResult) -> Optional[str]:
    """Message when --expect avoiding meets Forced; every other combination passes"""
    if config.expect == "avoiding" and result.verdict == Verdict.FORCED.value:
        return "expected Avoiding, got Forced"
    return None
