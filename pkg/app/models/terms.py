"""
Term expressions over template variables

A term is a finite tree of Var / Const / Add / Mul nodes. Terms print and parse
in prefix notation, e.g. "(+ (* x0 x1) x0)" or "(+ x0 (* 2 x1))", and normalize
to a hashable key (flattened, operand-sorted, constants folded) used to spot
syntactic duplicates.
"""

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import reduce
from typing import Callable, List, Optional, Sequence, Tuple, Union

from app.core.errors import TemplateError
from app.models.ground import Element, GroundSet


class Rejection(str, Enum):
    OUT_OF_GROUND = "out_of_ground"
    ZERO_VIOLATION = "zero_violation"
    DISTINCTNESS_VIOLATION = "distinctness_violation"


OutOfGround = Rejection.OUT_OF_GROUND


@dataclass(frozen=True)
class Var:
    index: int

    def __str__(self) -> str:
        return f"x{self.index}"


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Add:
    left: "TermExpr"
    right: "TermExpr"

    def __str__(self) -> str:
        return f"(+ {self.left} {self.right})"


@dataclass(frozen=True)
class Mul:
    left: "TermExpr"
    right: "TermExpr"

    def __str__(self) -> str:
        return f"(* {self.left} {self.right})"


TermExpr = Union[Var, Const, Add, Mul]


def add(*operands: TermExpr) -> TermExpr:
    return reduce(Add, operands)


def mul(*operands: TermExpr) -> TermExpr:
    return reduce(Mul, operands)


def max_var_index(expr: TermExpr) -> int:
    """Largest variable index in expr, -1 for a constant tree"""
    if isinstance(expr, Var):
        return expr.index
    if isinstance(expr, Const):
        return -1
    return max(max_var_index(expr.left), max_var_index(expr.right))


def substitute(expr: TermExpr, args: Sequence[TermExpr]) -> TermExpr:
    """Replace Var(i) by args[i]"""
    if isinstance(expr, Var):
        return args[expr.index]
    if isinstance(expr, Const):
        return expr
    return type(expr)(substitute(expr.left, args), substitute(expr.right, args))


# ================================
# PREFIX NOTATION
# ================================

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def format_term(expr: TermExpr) -> str:
    return str(expr)


def parse_term(text: str) -> TermExpr:
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise TemplateError(f"empty term expression '{text}'")
    expr, pos = _parse_tokens(tokens, 0, text)
    if pos != len(tokens):
        raise TemplateError(f"trailing tokens in term expression '{text}'")
    return expr


def _parse_tokens(tokens: List[str], pos: int, text: str) -> Tuple[TermExpr, int]:
    if pos >= len(tokens):
        raise TemplateError(f"unexpected end of term expression '{text}'")
    token = tokens[pos]
    if token == "(":
        if pos + 1 >= len(tokens) or tokens[pos + 1] not in ("+", "*"):
            raise TemplateError(f"expected operator after '(' in '{text}'")
        node = Add if tokens[pos + 1] == "+" else Mul
        pos += 2
        operands = []
        while pos < len(tokens) and tokens[pos] != ")":
            operand, pos = _parse_tokens(tokens, pos, text)
            operands.append(operand)
        if pos >= len(tokens):
            raise TemplateError(f"unbalanced parentheses in '{text}'")
        if len(operands) < 2:
            raise TemplateError(f"operator needs at least two operands in '{text}'")
        return reduce(node, operands), pos + 1
    if token == ")":
        raise TemplateError(f"unexpected ')' in '{text}'")
    if re.fullmatch(r"x\d+", token):
        return Var(int(token[1:])), pos + 1
    try:
        return Const(Fraction(token)), pos + 1
    except (ValueError, ZeroDivisionError):
        raise TemplateError(f"bad token '{token}' in '{text}'")


# ================================
# NORMALIZATION
# ================================

def normalize(expr: TermExpr) -> tuple:
    """Canonical key: Add/Mul flattened to sorted operand tuples, constants folded"""
    if isinstance(expr, Var):
        return ("v", expr.index)
    if isinstance(expr, Const):
        return ("c", expr.value)

    op = "+" if isinstance(expr, Add) else "*"
    operands = []
    constant = Fraction(0) if op == "+" else Fraction(1)
    for child in _flatten(expr, type(expr)):
        key = normalize(child)
        if key[0] == "c":
            constant = constant + key[1] if op == "+" else constant * key[1]
        elif key[0] == op:
            operands.extend(key[1])
        else:
            operands.append(key)

    if op == "*" and constant == 0:
        return ("c", Fraction(0))
    neutral = Fraction(0) if op == "+" else Fraction(1)
    if constant != neutral:
        operands.append(("c", constant))
    if not operands:
        return ("c", constant)
    if len(operands) == 1:
        return operands[0]
    return (op, tuple(sorted(operands, key=_sort_key)))


def _flatten(expr: TermExpr, node: type) -> List[TermExpr]:
    if isinstance(expr, node):
        return _flatten(expr.left, node) + _flatten(expr.right, node)
    return [expr]


def _sort_key(key: tuple) -> str:
    return repr(key)


# ================================
# EVALUATION
# ================================

def eval_term(expr: TermExpr, assignment: Sequence[Element], ground: GroundSet):
    """Evaluate exactly; OutOfGround when any Add/Mul value leaves a non-closed ground"""
    result = compile_term(expr, ground)(assignment)
    return OutOfGround if result is None else result


def compile_term(expr: TermExpr, ground: GroundSet) -> Callable[[Sequence[Element]], Optional[Element]]:
    """Closure evaluating expr; returns None on leaving the ground"""
    if isinstance(expr, Var):
        index = expr.index
        return lambda assignment: assignment[index]

    if isinstance(expr, Const):
        value = ground.const(expr.value)
        return lambda assignment: value

    left = compile_term(expr.left, ground)
    right = compile_term(expr.right, ground)
    op = ground.add if isinstance(expr, Add) else ground.mul
    contains = ground.contains
    closed = ground.closed

    def evaluate(assignment):
        a = left(assignment)
        if a is None:
            return None
        b = right(assignment)
        if b is None:
            return None
        value = op(a, b)
        if not closed and not contains(value):
            return None
        return value

    return evaluate
