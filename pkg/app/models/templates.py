"""
Pattern templates

A template is a variable count, a list of term expressions, the set of variables
that must be nonzero and an optional distinctness flag. Builtins cover the
Schur, Moreira and {x,y,xy,x+y} patterns; general_template expands the
coefficient-function family; further patterns ship in templates.yaml.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import yaml

from app.core.errors import TemplateError
from app.models.ground import Element, GroundSet
from app.models.terms import (
    Add, Const, Mul, Rejection, TermExpr, Var,
    compile_term, format_term, max_var_index, mul, normalize, parse_term, substitute,
)

logger = logging.getLogger(__name__)

LIBRARY_PATH = Path(__file__).parent / "templates.yaml"


class BuiltinTemplate(str, Enum):
    SCHUR = "schur"
    MOREIRA = "moreira"
    QUAD = "quad"
    QUAD_AP = "quad_ap"


@dataclass(frozen=True)
class PatternTemplate:
    num_vars: int
    terms: Tuple[TermExpr, ...]
    nonzero_vars: FrozenSet[int]
    distinct: bool = False
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "nonzero_vars", frozenset(self.nonzero_vars))
        if self.num_vars < 1:
            raise TemplateError(f"template '{self.name}' needs at least one variable")
        if not self.terms:
            raise TemplateError(f"template '{self.name}' has no terms")
        for term in self.terms:
            if max_var_index(term) >= self.num_vars:
                raise TemplateError(f"term {term} uses a variable beyond x{self.num_vars - 1}")
        if any(v < 0 or v >= self.num_vars for v in self.nonzero_vars):
            raise TemplateError(f"nonzero variable out of range in template '{self.name}'")
        keys = [normalize(t) for t in self.terms]
        if len(set(keys)) != len(keys):
            raise TemplateError(f"template '{self.name}' lists the same term twice")

    @property
    def label(self) -> str:
        return self.name

    def to_dict(self) -> Dict:
        return {
            "numVars": self.num_vars,
            "terms": [format_term(t) for t in self.terms],
            "nonzeroVars": sorted(self.nonzero_vars),
            "distinct": self.distinct,
        }

    @classmethod
    def from_dict(cls, data: Dict, name: str = "custom") -> "PatternTemplate":
        unknown = set(data) - {"numVars", "terms", "nonzeroVars", "distinct", "description"}
        if unknown:
            raise TemplateError(f"unknown template keys: {', '.join(sorted(unknown))}")
        try:
            return cls(
                num_vars=int(data["numVars"]),
                terms=tuple(parse_term(t) for t in data["terms"]),
                nonzero_vars=frozenset(data.get("nonzeroVars", [])),
                distinct=bool(data.get("distinct", False)),
                name=name,
            )
        except KeyError as e:
            raise TemplateError(f"template '{name}' is missing {e}")


@dataclass(frozen=True)
class Instance:
    assignment: Tuple[Element, ...]
    term_values: Tuple[Element, ...]


@dataclass(frozen=True)
class Rejected:
    reason: Rejection


# ================================
# INSTANTIATION
# ================================

@lru_cache(maxsize=64)
def compile_template(template: PatternTemplate, ground: GroundSet) -> Callable[[Sequence[Element]], Union[Tuple, Rejected]]:
    """Evaluator for repeated instantiation over one ground"""
    evaluators = [compile_term(t, ground) for t in template.terms]
    nonzero = sorted(template.nonzero_vars)
    contains = ground.contains
    distinct = template.distinct
    zero_violation = Rejected(Rejection.ZERO_VIOLATION)
    out_of_ground = Rejected(Rejection.OUT_OF_GROUND)
    distinctness_violation = Rejected(Rejection.DISTINCTNESS_VIOLATION)

    def evaluate(assignment):
        for v in nonzero:
            if assignment[v] == 0:
                return zero_violation
        values = []
        for evaluator in evaluators:
            value = evaluator(assignment)
            if value is None or not contains(value):
                return out_of_ground
            values.append(value)
        if distinct and len(set(values)) != len(values):
            return distinctness_violation
        return tuple(values)

    return evaluate


def instantiate(template: PatternTemplate, assignment: Sequence[Element], ground: GroundSet) -> Union[Instance, Rejected]:
    if len(assignment) != template.num_vars:
        raise TemplateError(f"expected {template.num_vars} values, got {len(assignment)}")
    assignment = tuple(assignment)
    if not all(ground.contains(a) for a in assignment):
        return Rejected(Rejection.OUT_OF_GROUND)
    result = compile_template(template, ground)(assignment)
    if isinstance(result, Rejected):
        return result
    return Instance(assignment, result)


# ================================
# BUILTINS
# ================================

def _scaled(coefficient: TermExpr, var: TermExpr) -> Optional[TermExpr]:
    key = normalize(coefficient)
    if key == ("c", 0):
        return None
    if key == ("c", 1):
        return var
    return Mul(coefficient, var)


def builtin_template(name: Union[str, BuiltinTemplate], k: Optional[int] = None) -> PatternTemplate:
    try:
        kind = BuiltinTemplate(str(getattr(name, "value", name)).lower())
    except ValueError:
        raise TemplateError(f"unknown builtin template '{name}'")

    if kind is BuiltinTemplate.QUAD_AP:
        if k is None or isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise TemplateError(f"quad_ap needs a positive integer k, got {k!r}")
    elif k is not None:
        raise TemplateError(f"k only applies to quad_ap, not {kind.value}")

    x, y = Var(0), Var(1)
    if kind is BuiltinTemplate.SCHUR:
        terms = [x, y, Add(x, y)]
    elif kind is BuiltinTemplate.MOREIRA:
        terms = [x, Mul(x, y), Add(x, y)]
    elif kind is BuiltinTemplate.QUAD:
        terms = [x, y, Mul(x, y), Add(x, y)]
    else:
        terms = [x, y, Mul(x, y)] + [Add(x, _scaled(Const(i), y)) for i in range(1, k + 1)]

    label = kind.value if k is None else f"{kind.value}({k})"
    return PatternTemplate(2, tuple(terms), frozenset({0, 1}), name=label)


# ================================
# GENERAL FAMILY
# ================================

@dataclass(frozen=True)
class CoefficientFn:
    """A coefficient h(a_0, ..., a_{m-1}); Var(i) in expr is the argument a_i"""
    expr: TermExpr
    arity: Optional[int] = None

    @property
    def needed(self) -> int:
        return max_var_index(self.expr) + 1

    def applies_at(self, position: int) -> bool:
        # position s feeds the arguments x_1..x_{s-1}
        return self.needed <= position - 1


def general_template(H: Iterable[Union[CoefficientFn, TermExpr]], t: int, name: str = "general") -> PatternTemplate:
    coefficients = [h if isinstance(h, CoefficientFn) else CoefficientFn(h) for h in H]
    if not coefficients:
        raise TemplateError("coefficient family is empty")
    if t < 1:
        raise TemplateError(f"t must be positive, got {t}")
    for h in coefficients:
        if h.arity is not None and h.needed > h.arity:
            raise TemplateError(f"coefficient {h.expr} uses argument {h.needed - 1} but has arity {h.arity}")

    xs = [Var(i) for i in range(t + 1)]
    terms: List[TermExpr] = []
    seen = set()

    def push(term: TermExpr):
        key = normalize(term)
        if key not in seen:
            seen.add(key)
            terms.append(term)

    for i in range(t + 1):
        for j in range(i, t + 1):
            push(mul(*xs[i:j + 1]))

    for i in range(t):
        head = mul(*xs[:i + 1])
        positions = range(i + 1, t + 1)
        choices = [[h for h in coefficients if h.applies_at(s)] for s in positions]
        for combo in itertools.product(*choices):
            term = head
            for s, h in zip(positions, combo):
                scaled = _scaled(substitute(h.expr, xs[1:s]), xs[s])
                if scaled is not None:
                    term = Add(term, scaled)
            push(term)

    logger.debug(f"general template over {len(coefficients)} coefficients, t={t}: {len(terms)} terms")
    return PatternTemplate(t + 1, tuple(terms), frozenset(range(t + 1)), name=name)


# ================================
# LIBRARY
# ================================

def _library_entry(name: str, data: Dict) -> PatternTemplate:
    if "general" in data:
        spec = data["general"]
        H = [CoefficientFn(parse_term(str(h))) for h in spec["coefficients"]]
        return general_template(H, int(spec["t"]), name=name)
    return PatternTemplate.from_dict(data, name=name)


@lru_cache(maxsize=4)
def load_template_library(path: Path = LIBRARY_PATH) -> Dict[str, PatternTemplate]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Error loading template library {path}: {e}")
        raise TemplateError(f"cannot read template library {path}: {e}")

    library = {}
    for name, data in (raw.get("templates") or {}).items():
        library[name.lower()] = _library_entry(name.lower(), data)
    logger.info(f"Loaded {len(library)} templates from {path}")
    return library


def load_template_file(path: Union[str, Path]) -> PatternTemplate:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise TemplateError(f"cannot read template file {path}: {e}")
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise TemplateError(f"template file {path} must hold a mapping")
    return _library_entry(path.stem, data)


def resolve_template(name: str, k: Optional[int] = None, distinct: bool = False,
                     template_file: Optional[str] = None) -> PatternTemplate:
    """Builtins first, then the shipped library; a template file wins over both"""
    if template_file:
        template = load_template_file(template_file)
    elif name.lower() in {b.value for b in BuiltinTemplate}:
        template = builtin_template(name, k)
    else:
        library = load_template_library()
        if name.lower() not in library:
            raise TemplateError(f"unknown template '{name}'")
        template = library[name.lower()]
    if distinct and not template.distinct:
        template = replace(template, distinct=True)
    return template
