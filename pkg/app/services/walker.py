"""
Proof walker over prime fields

Runs the constructive skeleton of the {x, y, xy, x+y} argument at finite scale.
Uniform counting density on F_p is an exact shift-invariant mean, so each
density step is a direct computation over numpy boolean masks indexed by
residue. Every success is gated by a final monochromaticity check; a failed
check is an implementation bug and raises InternalVerificationError.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import reduce
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.errors import (
    ConstructionFailure, CoverFailure, InternalVerificationError, UncoveredElement, WalkPreconditionError,
)
from app.models.coloring import Coloring
from app.models.ground import Element, GroundSet, IntegerInterval, PrimeField
from app.models.templates import Instance, builtin_template, instantiate
from app.services.cover import CoverDecomposition, cover_decomposition
from app.services.prod import lemma_prod_construct
from app.services.structure import (
    ThickTestFamily, default_thick_family, find_ipr_witness, is_thick, ordered,
)

logger = logging.getLogger(__name__)

QUAD = builtin_template("quad")


# ================================
# DENSITY
# ================================

class DensityMode(str, Enum):
    EXACT_UNIFORM = "exact_uniform"
    INTERVAL_APPROX = "interval_approx"


@dataclass(frozen=True)
class DensityMean:
    """|A| / |ground|; exact and shift invariant on prime fields, approximate on intervals"""
    ground: GroundSet
    mode: Optional[DensityMode] = None
    epsilon: Fraction = Fraction(0)

    def __post_init__(self):
        if self.mode is None:
            mode = DensityMode.EXACT_UNIFORM if isinstance(self.ground, PrimeField) else DensityMode.INTERVAL_APPROX
            object.__setattr__(self, "mode", mode)

    def mask(self, A: Iterable[Element]) -> np.ndarray:
        mask = np.zeros(len(self.ground), dtype=bool)
        index = self.ground.index
        for x in A:
            mask[index[x]] = True
        return mask

    def members(self, mask: np.ndarray) -> FrozenSet[Element]:
        elements = self.ground.elements
        return frozenset(elements[i] for i in np.flatnonzero(mask))

    def measure(self, mask: np.ndarray) -> Fraction:
        return Fraction(int(mask.sum()), len(self.ground))

    def shifted(self, mask: np.ndarray, c: Element) -> np.ndarray:
        """Mask of {x : x + c in A}"""
        ground = self.ground
        if isinstance(ground, PrimeField):
            return np.roll(mask, -(c % ground.p))
        if isinstance(ground, IntegerInterval):
            c = Fraction(c)
            out = np.zeros_like(mask)
            if c.denominator != 1:
                return out
            c = int(c)
            size = len(mask)
            if 0 <= c < size:
                out[:size - c] = mask[c:]
            elif -size < c < 0:
                out[-c:] = mask[:size + c]
            return out
        index = ground.index
        return np.array([ground.contains(ground.add(x, c)) and bool(mask[index[ground.add(x, c)]])
                         for x in ground.elements], dtype=bool)


def density(A: Iterable[Element], mean: DensityMean) -> Fraction:
    return Fraction(len(set(A)), len(mean.ground))


def _common_mask(A_mask: np.ndarray, qs: Sequence[Element], y: Element, mean: DensityMean) -> np.ndarray:
    ground = mean.ground
    result = A_mask.copy()
    for q in qs:
        result &= mean.shifted(A_mask, ground.mul(q, y))
    return result


def _candidate_order(candidates: Iterable[Element], ground: GroundSet) -> List[Element]:
    if isinstance(candidates, (list, tuple)):
        return [y for y in candidates if y != 0]
    return [y for y in ordered(set(candidates), ground) if y != 0]


def best_density(A: Iterable[Element], qs: Sequence[Element], candidates: Iterable[Element],
                 mean: DensityMean) -> Fraction:
    A_mask = mean.mask(A)
    best = Fraction(0)
    for y in _candidate_order(candidates, mean.ground):
        best = max(best, mean.measure(_common_mask(A_mask, qs, y, mean)))
    return best


def bergelson_search(A: Iterable[Element], qs: Sequence[Element], candidates: Iterable[Element],
                     alpha_prime: Fraction, mean: DensityMean,
                     s: Optional[int] = None) -> Optional[Tuple[Element, FrozenSet[Element]]]:
    """First candidate y with d({x in A : x + q*y in A for all q}) > alpha_prime"""
    if s is not None and len(qs) > s:
        raise WalkPreconditionError(f"{len(qs)} shifts exceed s={s}")
    A_mask = mean.mask(A)
    threshold = Fraction(alpha_prime) + mean.epsilon
    for y in _candidate_order(candidates, mean.ground):
        common = _common_mask(A_mask, qs, y, mean)
        if mean.measure(common) > threshold:
            return y, mean.members(common)
    return None


# ================================
# DERIVED COLORING
# ================================

@dataclass(frozen=True, order=True)
class DerivedTuple:
    """(l, f_m for m in Y_l): x carries this color when x is in f_m*C_m for each listed m"""
    l: int
    shifts: Tuple[Tuple[int, Element], ...]

    def f(self, m: int) -> Element:
        return dict(self.shifts)[m]

    def __str__(self) -> str:
        return f"({self.l}; " + ", ".join(f"f{m}={f}" for m, f in self.shifts) + ")"


@dataclass
class DerivedColoring:
    base: Coloring
    cover: CoverDecomposition
    tuple_of: Dict[Element, DerivedTuple]
    classes: Dict[DerivedTuple, FrozenSet[Element]]

    @property
    def K(self) -> int:
        return len(self.classes)


def build_derived_coloring(coloring: Coloring, cover: CoverDecomposition) -> DerivedColoring:
    ground = coloring.ground
    classes = coloring.classes
    tuple_of = {}
    for x in cover.ambient:
        for l, Y in enumerate(cover.Ys):
            shifts = []
            for m in sorted(Y):
                f = next((f for f in cover.F
                          if ground.contains(ground.div(x, f)) and ground.div(x, f) in classes[m]), None)
                if f is None:
                    break
                shifts.append((m, f))
            else:
                tuple_of[x] = DerivedTuple(l, tuple(shifts))
                break
        else:
            raise UncoveredElement(x)

    grouped: Dict[DerivedTuple, set] = {}
    for x, t in tuple_of.items():
        grouped.setdefault(t, set()).add(x)
    derived = DerivedColoring(coloring, cover, tuple_of, {t: frozenset(v) for t, v in sorted(grouped.items())})
    logger.info(f"Derived coloring: K={derived.K} occupied tuples")
    return derived


# ================================
# Q_j
# ================================

def _product(values: Iterable[Element], ground: GroundSet) -> Element:
    return reduce(ground.mul, values, ground.const(1))


def compute_qj(j: int, F: Iterable[Element], ys: Sequence[Element], ground: GroundSet,
               strict: bool = False) -> Tuple[Element, ...]:
    """
    {y_i...y_{j-1} / (f * y_1...y_{i-1}) : f in F, 1 <= i <= j}.

    The i = j term is f^-1 / (y_1...y_{j-1}); it reduces to {1/f} at j = 1 and is
    what the final x + y step needs when the repeated tuples are adjacent.
    strict drops it for j > 1.
    """
    if j < 1:
        raise WalkPreconditionError(f"step index must be positive, got {j}")
    ys = list(ys)[:j - 1]
    if len(ys) < j - 1:
        raise WalkPreconditionError(f"Q_{j} needs {j - 1} earlier y values, got {len(ys)}")
    F = list(F)
    last = j - 1 if strict and j > 1 else j
    values = set()
    for i in range(1, last + 1):
        numerator = _product(ys[i - 1:j - 1], ground)
        before = _product(ys[:i - 1], ground)
        for f in F:
            values.add(ground.div(numerator, ground.mul(f, before)))
    return tuple(sorted(values))


def q_bound(N: int, width_of_F: int) -> int:
    """Largest |Q_j| over the N - 1 steps"""
    return width_of_F * max(1, N - 1)


# ================================
# PARAMETERS AND RESULTS
# ================================

@dataclass
class WalkParams:
    N: int = 6
    s: Optional[int] = None
    r: int = 1
    alpha_floor: Fraction = Fraction(1, 1000)
    seed: int = 0
    restarts: int = 0
    distinct: bool = False
    K: Optional[int] = None

    def validate(self) -> None:
        if self.N < 2:
            raise WalkPreconditionError(f"N must be at least 2 so that two steps can repeat, got {self.N}")
        if self.r < 1:
            raise WalkPreconditionError(f"r must be positive, got {self.r}")
        if Fraction(self.alpha_floor) <= 0:
            raise WalkPreconditionError(f"alpha_floor must be positive, got {self.alpha_floor}")
        if self.restarts < 0:
            raise WalkPreconditionError("restarts must be nonnegative")


class WalkStage(str, Enum):
    COVER = "CoverFailure"
    PROD = "ProdFailure"
    DENSITY = "DensityFailure"
    NO_REPEAT = "NoRepeatedTuple"
    NO_DISTINCT = "NoDistinctQuadruple"
    PROD_CONSTRUCT = "prodConstruct"
    FIRST_SEARCH = "firstSearch"
    SECOND_SEARCH = "secondSearch"


@dataclass
class WalkStep:
    j: int
    A: FrozenSet[Element]
    density: Fraction
    Q: Tuple[Element, ...]
    y: Element
    label: Optional[int]
    S: FrozenSet[Element]
    best_density: Fraction
    alpha_prime: Fraction
    A_next: FrozenSet[Element]
    tuple: Optional[DerivedTuple] = None
    next_tuple: Optional[DerivedTuple] = None
    bits: Dict[str, bool] = field(default_factory=dict)


@dataclass
class WalkTrace:
    p: int
    N: int
    K: int = 0
    Ys: Tuple[FrozenSet[int], ...] = ()
    F: Tuple[Element, ...] = ()
    degraded: bool = False
    attempt: int = 0
    steps: List[WalkStep] = field(default_factory=list)
    pair: Optional[Tuple[int, int]] = None
    y: Optional[Element] = None
    color: Optional[int] = None
    xs: List[Element] = field(default_factory=list)
    monochromatic: bool = False
    branch: Optional[str] = None

    @property
    def sets(self) -> List[FrozenSet[Element]]:
        """A_1..A_N"""
        if not self.steps:
            return []
        return [s.A for s in self.steps] + [self.steps[-1].A_next]

    @property
    def tuples(self) -> List[DerivedTuple]:
        """t_1..t_N"""
        if not self.steps:
            return []
        return [s.tuple for s in self.steps] + [self.steps[-1].next_tuple]


@dataclass
class WalkSuccess:
    x: Element
    y: Element
    color: int
    quadruple: Tuple[Element, ...]
    trace: WalkTrace
    xs: List[Element] = field(default_factory=list)

    ok = True


@dataclass
class WalkFailure:
    stage: WalkStage
    step: Optional[int]
    detail: str
    trace: Optional[WalkTrace] = None

    ok = False


WalkResult = Union[WalkSuccess, WalkFailure]


def walk_outcomes(results: Iterable[WalkResult]) -> Dict[str, int]:
    """Success and per-stage failure counts over a batch of walks"""
    tally = Counter("Success" if r.ok else r.stage.value for r in results)
    total = sum(tally.values())
    if total:
        stages = ", ".join(f"{k}={v}" for k, v in sorted(tally.items()))
        logger.info(f"{tally['Success']}/{total} walks succeeded ({stages})")
    return dict(tally)


# ================================
# SHARED CHECKS
# ================================

def _require_prime_field(coloring: Coloring) -> PrimeField:
    if not isinstance(coloring.ground, PrimeField):
        raise WalkPreconditionError(f"walks run over prime fields, not {coloring.ground.spec}")
    return coloring.ground


def _verify_quadruple(coloring: Coloring, x: Element, y: Element, color: int) -> Instance:
    """The final gate: {x, y, xy, x+y} must instantiate and carry one color"""
    instance = instantiate(QUAD, (x, y), coloring.ground)
    if not isinstance(instance, Instance):
        raise InternalVerificationError(f"walk produced x={x}, y={y} rejected as {instance.reason.value}")
    colors = {coloring.color(v) for v in instance.term_values}
    if colors != {color}:
        raise InternalVerificationError(
            f"walk produced {instance.term_values} with colors {sorted(colors)}, expected {color}",
            payload={"x": x, "y": y},
        )
    return instance


def _step_threshold(A: FrozenSet[Element], qs: Sequence[Element], candidates: Sequence[Element],
                    params: WalkParams, mean: DensityMean) -> Tuple[Fraction, Fraction]:
    best = best_density(A, qs, candidates, mean)
    alpha = max(Fraction(params.alpha_floor), best - Fraction(1, len(mean.ground)))
    return best, alpha


def isolate_one(coloring: Coloring) -> Coloring:
    """Give 1 a fresh color so that no walk can pick y = 1"""
    colors = list(coloring.colors)
    colors[coloring.ground.index[1]] = coloring.n
    return Coloring(coloring.ground, coloring.n + 1, tuple(colors))


def _distinct_values(x: Element, y: Element, ground: GroundSet) -> bool:
    values = (x, y, ground.mul(x, y), ground.add(x, y))
    return len(set(values)) == 4


# ================================
# TWO THICK COLORS
# ================================

def walk_claim_thick(coloring: Coloring, params: WalkParams,
                     family: Optional[ThickTestFamily] = None) -> WalkResult:
    """Two-color walk: both classes thick, start from the denser one"""
    ground = _require_prime_field(coloring)
    params.validate()
    if coloring.n != 2:
        raise WalkPreconditionError(f"the two-class walk needs exactly 2 colors, got {coloring.n}")

    ambient = ground.nonzero_elements
    classes = [c - {0} for c in coloring.classes]
    a = 0 if len(classes[0]) >= len(classes[1]) else 1
    b = 1 - a
    C_a, C_b = classes[a], classes[b]
    if family is None:
        family = default_thick_family(ambient, 2, ground)
    for m, cls in enumerate(classes):
        if is_thick(cls, family, ambient, ground) is None:
            raise WalkPreconditionError(f"color {m} is not thick for the test family")

    mean = DensityMean(ground)
    trace = WalkTrace(p=ground.p, N=2)

    witness_b = find_ipr_witness(C_b, params.r, C_b, ground)
    if witness_b is None:
        return WalkFailure(WalkStage.PROD_CONSTRUCT, None, f"no IP_{params.r} set inside color {b}", trace)
    S_2 = witness_b.fs(ground)
    admissible = {t for t in C_a if all(ground.mul(t, s) in C_a for s in S_2)}
    witness_a = find_ipr_witness(admissible, params.r, admissible, ground)
    if witness_a is None:
        return WalkFailure(WalkStage.PROD_CONSTRUCT, None, f"no IP_{params.r} set inside color {a} absorbing S_2", trace)
    S_1 = witness_a.fs(ground)

    A = frozenset(C_a)
    qs = (1,)
    candidates = ordered(S_1, ground)
    best, alpha = _step_threshold(A, qs, candidates, params, mean)
    found = bergelson_search(A, qs, candidates, alpha, mean)
    if found is None:
        return WalkFailure(WalkStage.FIRST_SEARCH, 1, f"best density {best} does not exceed {alpha}", trace)
    y_1, C_1 = found
    trace.steps.append(WalkStep(1, A, mean.measure(mean.mask(A)), qs, y_1, a, frozenset(S_1), best, alpha, C_1))

    hits = [x for x in ordered(C_1, ground) if ground.mul(x, y_1) in C_a]
    if hits:
        y, color, xs, branch = y_1, a, hits, "first"
    else:
        qs = tuple(sorted({y_1, ground.inverse(y_1)}))
        candidates = ordered(S_2, ground)
        best, alpha = _step_threshold(C_1, qs, candidates, params, mean)
        found = bergelson_search(C_1, qs, candidates, alpha, mean)
        if found is None:
            return WalkFailure(WalkStage.SECOND_SEARCH, 2, f"best density {best} does not exceed {alpha}", trace)
        y_2, C_2 = found
        trace.steps.append(WalkStep(2, C_1, mean.measure(mean.mask(C_1)), qs, y_2, b, frozenset(S_2), best, alpha, C_2))
        y_12 = ground.mul(y_1, y_2)
        hits = [x for x in ordered(C_2, ground) if ground.mul(x, y_12) in C_a]
        if hits:
            y, color, xs, branch = y_12, a, hits, "product"
        else:
            y, color, branch = y_2, b, "second"
            xs = [ground.mul(y_1, x) for x in ordered(C_2, ground)]

    for x in xs:
        _verify_quadruple(coloring, x, y, color)
    trace.y, trace.color, trace.xs, trace.monochromatic, trace.branch = y, color, xs, True, branch
    quadruple = (xs[0], y, ground.mul(xs[0], y), ground.add(xs[0], y))
    logger.info(f"Two-class walk on fp:{ground.p}: y={y}, x={xs[0]} in color {color} ({branch} branch)")
    return WalkSuccess(xs[0], y, color, quadruple, trace, xs)


# ================================
# n COLORS
# ================================

def _densest(groups: Dict[DerivedTuple, FrozenSet[Element]]) -> Tuple[DerivedTuple, FrozenSet[Element]]:
    t = min(groups, key=lambda key: (-len(groups[key]), key))
    return t, groups[t]


def _walk_once(coloring: Coloring, derived: DerivedColoring, column: Callable[[int, int], List[Element]],
               params: WalkParams, s: int, degraded: bool, attempt: int) -> WalkResult:
    ground = coloring.ground
    cover = derived.cover
    mean = DensityMean(ground)
    F_inv = tuple(ground.inverse(f) for f in cover.F)
    trace = WalkTrace(p=ground.p, N=params.N, K=derived.K, Ys=cover.Ys, F=cover.F,
                      degraded=degraded, attempt=attempt)

    t, A = _densest(derived.classes)
    ys: List[Element] = []
    running = ground.const(1)
    for j in range(1, params.N):
        Q = compute_qj(j, F_inv, ys, ground)
        candidates = column(t.l, j - 1)
        best, alpha = _step_threshold(A, Q, candidates, params, mean)
        found = bergelson_search(A, Q, candidates, alpha, mean, s=s)
        if found is None:
            return WalkFailure(WalkStage.DENSITY, j, f"best density {best} does not exceed {alpha}", trace)
        y, A_prime = found
        running = ground.mul(running, y)

        groups: Dict[DerivedTuple, set] = {}
        for x in A_prime:
            groups.setdefault(derived.tuple_of[ground.mul(x, running)], set()).add(x)
        t_next, A_next = _densest({key: frozenset(v) for key, v in groups.items()})

        step = WalkStep(j, A, mean.measure(mean.mask(A)), Q, y, t.l, frozenset(candidates),
                        best, alpha, A_next, t, t_next)
        step.bits = {
            "property1": A_next <= A and all(ground.add(x, ground.mul(q, y)) in A for x in A_next for q in Q),
            "property2": all(derived.tuple_of[ground.mul(x, running)] == t_next for x in A_next),
            "property3": y in step.S,
        }
        trace.steps.append(step)
        logger.debug(f"step {j}: |A|={len(A)}, |Q|={len(Q)}, y={y}, alpha'={alpha}, next tuple {t_next}")
        ys.append(y)
        t, A = t_next, A_next

    tuples, sets = trace.tuples, trace.sets
    pair = next(((i, j) for i in range(1, params.N + 1) for j in range(i + 1, params.N + 1)
                 if tuples[i - 1] == tuples[j - 1]), None)
    if pair is None:
        return WalkFailure(WalkStage.NO_REPEAT, None, f"no derived tuple repeats among {params.N} steps", trace)
    i, j = pair
    trace.pair = pair

    y = _product(ys[i - 1:j - 1], ground)
    shared = tuples[i - 1]
    color = coloring.color(y)
    trace.y = y
    if color not in cover.Ys[shared.l]:
        if degraded:
            return WalkFailure(WalkStage.PROD, None, f"y={y} has color {color}, outside Y_{shared.l}", trace)
        raise InternalVerificationError(f"product family containment broken: y={y} has color {color}")
    trace.color = color

    before = _product(ys[:i - 1], ground)
    f_m = shared.f(color)
    xs = [ground.div(ground.mul(x_prime, before), f_m) for x_prime in ordered(sets[j - 1], ground)]
    for x in xs:
        _verify_quadruple(coloring, x, y, color)
    trace.xs, trace.monochromatic = xs, True
    quadruple = (xs[0], y, ground.mul(xs[0], y), ground.add(xs[0], y))
    return WalkSuccess(xs[0], y, color, quadruple, trace, xs)


def walk_theorem_m2(coloring: Coloring, params: WalkParams, width: int,
                    family: Optional[ThickTestFamily] = None) -> WalkResult:
    """n-color walk through the cover, the derived coloring and the product family"""
    ground = _require_prime_field(coloring)
    params.validate()
    base = isolate_one(coloring) if params.distinct else coloring
    ambient = ground.nonzero_elements

    try:
        cover = cover_decomposition(base, width, ambient, family)
    except CoverFailure as e:
        return WalkFailure(WalkStage.COVER, None, e.detail)
    derived = build_derived_coloring(base, cover)
    params.K = derived.K

    bound = q_bound(params.N, len(cover.F))
    if params.s is not None and params.s < bound:
        raise WalkPreconditionError(f"s={params.s} is below the largest |Q_j| = {bound}")
    s = params.s if params.s is not None else bound

    thick_unions = [cover.union(l, base) for l in range(cover.k)]
    failure: Optional[WalkFailure] = None
    for attempt in range(params.restarts + 1):
        order = None
        if attempt > 0:
            rng = np.random.default_rng(params.seed + attempt)
            order = [ambient[i] for i in rng.permutation(len(ambient))]
        try:
            prod = lemma_prod_construct(thick_unions, params.r, params.N, ambient, ground, order=order)
            degraded = False
        except ConstructionFailure as e:
            logger.warning(f"Product family unavailable ({e.detail}); walking inside the thick unions")
            prod, degraded = None, True

        def column(l: int, j: int, prod=prod, order=order) -> List[Element]:
            members = prod.sets[l][j] if prod is not None else thick_unions[l]
            if order is None:
                return ordered(members, ground)
            return [e for e in order if e in members]

        result = _walk_once(base, derived, column, params, s, degraded, attempt)
        if isinstance(result, WalkSuccess):
            break
        failure = result
        logger.info(f"Walk attempt {attempt} failed: {result.stage.value} {result.detail}")
    else:
        return failure

    if base is not coloring:
        for x in result.xs:
            _verify_quadruple(coloring, x, result.y, coloring.color(result.y))
        result.xs = [x for x in result.xs if _distinct_values(x, result.y, ground)]
        if not result.xs:
            return WalkFailure(WalkStage.NO_DISTINCT, None, f"every x for y={result.y} repeats a value", result.trace)
        result.x = result.xs[0]
        result.quadruple = (result.x, result.y, ground.mul(result.x, result.y), ground.add(result.x, result.y))
        result.color = coloring.color(result.y)

    logger.info(f"Walk on fp:{ground.p}: y={result.y}, x={result.x} in color {result.color} "
                f"(pair {result.trace.pair}, {len(result.xs)} x values)")
    return result
