"""
CNF encoding of the avoidance problem and DIMACS input/output

Variable x_{e,c} ("element e has color c") is numbered idx(e)*n + c + 1, where
idx is the ground's enumeration position. Clause order: for every element its
at-least-one clause followed by its pairwise at-most-one clauses, then one
avoidance clause per (instance value set, color) in instance enumeration order.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from app.core.errors import ConfigError, SolverError
from app.models.ground import GroundSet
from app.models.templates import PatternTemplate
from app.services.search import instance_value_sets

logger = logging.getLogger(__name__)

Clause = Tuple[int, ...]


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: Tuple[Clause, ...]
    n: int
    instance_sets: int
    degenerate: bool = False

    def with_units(self, units: Sequence[int]) -> "CnfFormula":
        return CnfFormula(self.num_vars, self.clauses + tuple((u,) for u in units),
                          self.n, self.instance_sets, self.degenerate)


def color_var(index: int, color: int, n: int) -> int:
    return index * n + color + 1


def decode_var(var: int, n: int) -> Tuple[int, int]:
    """(element index, color) for a variable id"""
    return (var - 1) // n, (var - 1) % n


def encode_cnf(ground: GroundSet, n: int, template: PatternTemplate) -> CnfFormula:
    if n < 2:
        raise ConfigError("colors", f"CNF encoding needs at least two colors, got {n}")

    clauses: List[Clause] = []
    for i in range(len(ground)):
        clauses.append(tuple(color_var(i, c, n) for c in range(n)))
        for c in range(n):
            for d in range(c + 1, n):
                clauses.append((-color_var(i, c, n), -color_var(i, d, n)))

    value_sets = instance_value_sets(template, ground)
    for members in value_sets:
        for c in range(n):
            clauses.append(tuple(-color_var(i, c, n) for i in members))

    degenerate = not value_sets
    if degenerate:
        logger.warning(f"Template {template.label} has no instances in {ground.spec}; formula is trivially satisfiable")

    return CnfFormula(len(ground) * n, tuple(clauses), n, len(value_sets), degenerate)


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {len(formula.clauses)}\n"]
    lines.extend(" ".join(map(str, clause)) + " 0\n" for clause in formula.clauses)
    return "".join(lines)


def write_dimacs(formula: CnfFormula, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(to_dimacs(formula))
    logger.info(f"Wrote DIMACS ({formula.num_vars} vars, {len(formula.clauses)} clauses) to {path}")


# ================================
# SOLVER OUTPUT
# ================================

@dataclass(frozen=True)
class SolverOutput:
    satisfiable: bool
    model: Optional[Dict[int, bool]] = None


def parse_solver_output(text: str) -> SolverOutput:
    """Read the `s` status line and `v` model lines of a competition-format solver"""
    status = None
    literals: List[int] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip()
            if word == "SATISFIABLE":
                status = True
            elif word == "UNSATISFIABLE":
                status = False
            else:
                raise SolverError(f"line {line_no}: unrecognised status '{word}'")
        elif line.startswith("v ") or line == "v":
            try:
                literals.extend(int(tok) for tok in line[1:].split())
            except ValueError:
                raise SolverError(f"line {line_no}: malformed model line")

    if status is None:
        raise SolverError("solver output has no status line")
    if not status:
        return SolverOutput(False)
    if not literals:
        raise SolverError("solver reported SATISFIABLE without a model")
    return SolverOutput(True, {abs(l): l > 0 for l in literals if l != 0})
