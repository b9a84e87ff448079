"""
Avoidance search: does some n-coloring of the ground avoid every monochromatic
instance of a template?

Three methods share one result type. Exhaustive backtracks with forward
checking; Sat runs the built-in DPLL solver on the CNF encoding; SatExternal
writes DIMACS and ingests a competition-format solver's output. Every Avoiding
coloring is re-checked by direct search before it is returned, and every
Exhaustive Forced verdict is cross-checked with the solver.
"""

import logging
import math
import shlex
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from app.core.errors import BudgetExceeded, ConfigError, InternalVerificationError, SolverError
from app.models.coloring import Coloring, mono_coloring
from app.models.ground import GroundSet, IntegerInterval, PrimeField
from app.models.templates import PatternTemplate
from app.services.cnf import CnfFormula, color_var, encode_cnf, parse_solver_output, write_dimacs
from app.services.dpll import solve_cnf
from app.services.search import find_instances, instance_value_sets, valid_instances

logger = logging.getLogger(__name__)

DEFAULT_EXHAUSTIVE_BUDGET = 64


class Method(str, Enum):
    EXHAUSTIVE = "exhaustive"
    SAT = "sat"
    SAT_EXTERNAL = "sat_external"


class Verdict(str, Enum):
    AVOIDING = "Avoiding"
    FORCED = "Forced"


@dataclass
class AvoidanceResult:
    ground: str
    n: int
    template: str
    method: Method
    verdict: Verdict
    coloring: Optional[Coloring] = None
    instance_sets: int = 0
    seconds: float = 0.0
    externally_certified: bool = False
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def avoiding(self) -> bool:
        return self.verdict is Verdict.AVOIDING


@dataclass
class ExternalSolver:
    cnf_out: str
    model_file: Optional[str] = None
    solver_cmd: Optional[str] = None


# ================================
# VERIFICATION
# ================================

def _certify_avoiding(coloring: Coloring, template: PatternTemplate, method: Method) -> None:
    hits = find_instances(coloring, template, limit=1)
    if hits:
        instance, color = hits[0]
        raise InternalVerificationError(
            f"{method.value} returned a coloring with a monochromatic instance {instance.term_values} in color {color}",
            payload=list(coloring.colors),
        )


def _coloring_from_model(ground: GroundSet, n: int, model: Dict[int, bool]) -> Coloring:
    colors = []
    for i, e in enumerate(ground.elements):
        chosen = [c for c in range(n) if model.get(color_var(i, c, n), False)]
        if len(chosen) != 1:
            raise SolverError(f"model gives element {e} {len(chosen)} colors")
        colors.append(chosen[0])
    return Coloring(ground, n, tuple(colors))


def _symmetry_breaking(formula: CnfFormula) -> CnfFormula:
    # colors are interchangeable, so the least element may be fixed to color 0
    return formula.with_units([color_var(0, 0, formula.n)])


# ================================
# EXHAUSTIVE
# ================================

def exhaustive_bits(ground: GroundSet, n: int) -> float:
    return len(ground) * math.log2(n) if n > 1 else 0.0


def _exhaustive_search(size: int, n: int, value_sets: Sequence[Tuple[int, ...]],
                       fixed: Dict[int, int]) -> Optional[List[int]]:
    """
    Lexicographically least avoiding color list with the given prefix fixed.
    Variables branch in index order; forward checking drops a color from the last
    open member of every instance and fails as soon as a domain empties.
    """
    full = (1 << n) - 1
    domains = [full] * size
    for i, c in fixed.items():
        domains[i] = 1 << c
    members: List[List[Tuple[int, ...]]] = [[] for _ in range(size)]
    for s in value_sets:
        if len(s) == 1:
            return None
        for i in s:
            members[i].append(s)
    colors = [-1] * size

    def extend(i: int) -> bool:
        if i == size:
            return True
        for c in range(n):
            if not domains[i] >> c & 1:
                continue
            colors[i] = c
            trail = []
            consistent = True
            for s in members[i]:
                open_member = None
                open_count = 0
                for j in s:
                    if j == i:
                        continue
                    if colors[j] == -1:
                        open_member = j
                        open_count += 1
                    elif colors[j] != c:
                        open_count = -1
                        break
                if open_count == 0:
                    consistent = False
                    break
                if open_count != 1 or not domains[open_member] >> c & 1:
                    continue
                trail.append((open_member, domains[open_member]))
                domains[open_member] &= ~(1 << c)
                if domains[open_member] == 0:
                    consistent = False
                    break
            if consistent and extend(i + 1):
                return True
            for j, old in reversed(trail):
                domains[j] = old
            colors[i] = -1
        return False

    return list(colors) if extend(0) else None


def _prefixes(size: int, n: int, workers: int) -> List[Dict[int, int]]:
    depth = 0
    while n ** depth < workers and depth + 1 < size:
        depth += 1
    prefixes = []
    for code in range(n ** depth):
        digits = []
        for _ in range(depth):
            code, d = divmod(code, n)
            digits.append(d)
        prefix = {0: 0}
        prefix.update({k + 1: d for k, d in enumerate(reversed(digits))})
        prefixes.append(prefix)
    return prefixes


def _solve_exhaustive(ground: GroundSet, n: int, template: PatternTemplate, workers: int) -> Optional[List[int]]:
    value_sets = instance_value_sets(template, ground)
    size = len(ground)
    if workers <= 1:
        return _exhaustive_search(size, n, value_sets, {0: 0})

    # disjoint prefixes in lexicographic order; the first success is the global least
    prefixes = _prefixes(size, n, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_exhaustive_search, [size] * len(prefixes), [n] * len(prefixes),
                                [value_sets] * len(prefixes), prefixes))
    return next((r for r in results if r is not None), None)


# ================================
# SAT
# ================================

def _solve_sat(ground: GroundSet, n: int, template: PatternTemplate,
               max_decisions: Optional[int]) -> Tuple[Optional[Coloring], Dict[str, int], int]:
    formula = encode_cnf(ground, n, template)
    result = solve_cnf(formula.num_vars, _symmetry_breaking(formula).clauses, max_decisions)
    stats = {"decisions": result.stats.decisions, "propagations": result.stats.propagations,
             "conflicts": result.stats.conflicts}
    if not result.satisfiable:
        return None, stats, formula.instance_sets
    return _coloring_from_model(ground, n, result.model), stats, formula.instance_sets


def _solve_external(ground: GroundSet, n: int, template: PatternTemplate,
                    external: ExternalSolver) -> Tuple[Optional[Coloring], int]:
    formula = _symmetry_breaking(encode_cnf(ground, n, template))
    write_dimacs(formula, external.cnf_out)

    if external.solver_cmd:
        command = shlex.split(external.solver_cmd) + [external.cnf_out]
        logger.info(f"Running external solver: {' '.join(command)}")
        try:
            completed = subprocess.run(command, capture_output=True, text=True)
        except OSError as e:
            raise SolverError(f"cannot run solver '{external.solver_cmd}': {e}")
        output = completed.stdout
        if external.model_file:
            with open(external.model_file, "w", encoding="utf-8") as f:
                f.write(output)
    elif external.model_file:
        try:
            with open(external.model_file, "r", encoding="utf-8") as f:
                output = f.read()
        except OSError as e:
            raise SolverError(f"cannot read solver output {external.model_file}: {e}")
    else:
        raise SolverError(f"no solver command or output file given; DIMACS is at {external.cnf_out}")

    parsed = parse_solver_output(output)
    if not parsed.satisfiable:
        return None, formula.instance_sets
    coloring = _coloring_from_model(ground, n, parsed.model)
    if find_instances(coloring, template, limit=1):
        raise SolverError("external model contains a monochromatic instance")
    return coloring, formula.instance_sets


def avoidance_search(ground: GroundSet, n: int, template: PatternTemplate,
                     method: Method = Method.SAT,
                     budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
                     workers: int = 1,
                     max_decisions: Optional[int] = None,
                     external: Optional[ExternalSolver] = None) -> AvoidanceResult:
    method = Method(method)
    if n < 1:
        raise ConfigError("colors", f"need at least one color, got {n}")
    started = time.perf_counter()
    result = AvoidanceResult(ground.spec, n, template.label, method, Verdict.FORCED)

    if n == 1:
        # a single color makes every instance monochromatic
        instances = valid_instances(template, ground)
        if not instances:
            result.verdict, result.coloring = Verdict.AVOIDING, mono_coloring(ground)
        result.instance_sets = len(instance_value_sets(template, ground))
        result.seconds = time.perf_counter() - started
        return result

    if method is Method.EXHAUSTIVE:
        bits = exhaustive_bits(ground, n)
        if bits > budget:
            raise BudgetExceeded(f"exhaustive search over {bits:.1f} bits exceeds the budget of {budget}")
        colors = _solve_exhaustive(ground, n, template, workers)
        result.instance_sets = len(instance_value_sets(template, ground))
        if colors is not None:
            result.coloring = Coloring(ground, n, tuple(colors))
        else:
            sat_coloring, _, _ = _solve_sat(ground, n, template, max_decisions)
            if sat_coloring is not None:
                raise InternalVerificationError(
                    f"exhaustive search reports Forced on {ground.spec} but the solver found an avoiding coloring",
                    payload=list(sat_coloring.colors),
                )
    elif method is Method.SAT:
        result.coloring, result.stats, result.instance_sets = _solve_sat(ground, n, template, max_decisions)
    else:
        if external is None:
            raise ConfigError("cnf_out", "sat_external needs a DIMACS output path")
        result.coloring, result.instance_sets = _solve_external(ground, n, template, external)
        result.externally_certified = result.coloring is None

    if result.coloring is not None:
        _certify_avoiding(result.coloring, template, method)
        result.verdict = Verdict.AVOIDING

    result.seconds = time.perf_counter() - started
    logger.info(f"{template.label} on {ground.spec} with {n} colors ({method.value}): "
                f"{result.verdict.value} in {result.seconds:.3f}s")
    return result


# ================================
# SCANS
# ================================

@dataclass
class ScanRow:
    N: int
    result: Optional[AvoidanceResult]
    verdict: Verdict
    inferred: bool = False


@dataclass
class ThresholdScan:
    lo: int
    rows: List[ScanRow]
    minimal_forced: Optional[int]
    empirical: bool = False


def _run_all(task: Callable, jobs: List[tuple], workers: int) -> List[AvoidanceResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [task(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, *zip(*jobs)))


def threshold_scan(lo: int, max_n: int, n: int, template: PatternTemplate,
                   method: Method = Method.SAT, min_n: Optional[int] = None,
                   bisect: bool = True, workers: int = 1,
                   budget: int = DEFAULT_EXHAUSTIVE_BUDGET) -> ThresholdScan:
    """Verdicts for [lo..N], N from min_n (default lo) to max_n"""
    start = lo if min_n is None else min_n
    if start < lo or max_n < start:
        raise ConfigError("max_n", f"empty scan range {start}..{max_n}")
    sizes = list(range(start, max_n + 1))

    def run(N: int) -> AvoidanceResult:
        return avoidance_search(IntegerInterval(lo, N), n, template, method, budget=budget)

    evaluated: Dict[int, AvoidanceResult] = {}
    if not bisect:
        jobs = [(IntegerInterval(lo, N), n, template, method, budget) for N in sizes]
        for N, result in zip(sizes, _run_all(avoidance_search, jobs, workers)):
            evaluated[N] = result
        forced = [N for N in sizes if not evaluated[N].avoiding]
        minimal = forced[0] if forced else None
        if forced and any(evaluated[N].avoiding for N in sizes if N > minimal):
            raise InternalVerificationError(f"scan is not monotone above N={minimal}")
    else:
        # Forced is upward closed: an avoiding coloring restricts to every [lo..N'] with N' < N
        low, high = 0, len(sizes)
        while low < high:
            mid = (low + high) // 2
            N = sizes[mid]
            evaluated[N] = run(N)
            logger.info(f"scan [{lo}..{N}]: {evaluated[N].verdict.value}")
            if evaluated[N].avoiding:
                low = mid + 1
            else:
                high = mid
        minimal = sizes[low] if low < len(sizes) else None
        boundary = [sizes[i] for i in (low - 1, low) if 0 <= i < len(sizes)]
        for N in boundary:
            if N not in evaluated:
                evaluated[N] = run(N)
        if minimal is not None and evaluated[minimal].avoiding:
            raise InternalVerificationError(f"boundary check failed: [{lo}..{minimal}] is avoidable")
        if low > 0 and not evaluated[sizes[low - 1]].avoiding:
            raise InternalVerificationError(f"boundary check failed: [{lo}..{sizes[low - 1]}] is forced")

    rows = []
    for N in sizes:
        if N in evaluated:
            rows.append(ScanRow(N, evaluated[N], evaluated[N].verdict))
        else:
            verdict = Verdict.FORCED if minimal is not None and N >= minimal else Verdict.AVOIDING
            rows.append(ScanRow(N, None, verdict, inferred=True))
    return ThresholdScan(lo, rows, minimal)


def field_threshold(n: int, template: PatternTemplate, primes: Sequence[int],
                    method: Method = Method.SAT, workers: int = 1,
                    budget: int = DEFAULT_EXHAUSTIVE_BUDGET) -> ThresholdScan:
    """Raw per-prime verdicts on PrimeField(p); no monotonicity is assumed"""
    primes = list(primes)
    if primes != sorted(primes):
        raise ConfigError("primes", "primes must be ascending")
    jobs = [(PrimeField(p), n, template, method, budget) for p in primes]
    results = _run_all(avoidance_search, jobs, workers)
    rows = [ScanRow(p, r, r.verdict) for p, r in zip(primes, results)]
    forced = [p for p, r in zip(primes, results) if not r.avoiding]
    return ThresholdScan(0, rows, forced[0] if forced else None, empirical=True)
