"""
Built-in DPLL solver

Two watched literals per clause, unit propagation, chronological backtracking
and no clause learning. Branching follows a static most-constrained order
(variables by occurrence count, descending, ties by id) and tries the positive
literal first.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from app.core.errors import BudgetExceeded

logger = logging.getLogger(__name__)

TRUE, FALSE, UNASSIGNED = 1, -1, 0


@dataclass
class SolverStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0


@dataclass
class SolveResult:
    satisfiable: bool
    model: Optional[Dict[int, bool]] = None
    stats: SolverStats = field(default_factory=SolverStats)


class DpllSolver:
    def __init__(self, num_vars: int, clauses: Sequence[Sequence[int]], max_decisions: Optional[int] = None):
        self.num_vars = num_vars
        self.max_decisions = max_decisions
        self.stats = SolverStats()
        self.assign = [UNASSIGNED] * (num_vars + 1)
        self.trail: List[int] = []
        self.qhead = 0
        self.watches: List[List[int]] = [[] for _ in range(2 * num_vars + 2)]
        self.clauses: List[List[int]] = []
        self.units: List[int] = []
        self.empty_clause = False

        occurrences = [0] * (num_vars + 1)
        for clause in clauses:
            lits = list(dict.fromkeys(clause))
            for lit in lits:
                occurrences[abs(lit)] += 1
            if not lits:
                self.empty_clause = True
            elif len(lits) == 1:
                self.units.append(lits[0])
            else:
                ci = len(self.clauses)
                self.clauses.append(lits)
                self.watches[self._slot(lits[0])].append(ci)
                self.watches[self._slot(lits[1])].append(ci)

        self.order = sorted(range(1, num_vars + 1), key=lambda v: (-occurrences[v], v))

    @staticmethod
    def _slot(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _value(self, lit: int) -> int:
        a = self.assign[lit if lit > 0 else -lit]
        return a if lit > 0 else -a

    def _enqueue(self, lit: int) -> bool:
        value = self._value(lit)
        if value == FALSE:
            return False
        if value == UNASSIGNED:
            self.assign[abs(lit)] = TRUE if lit > 0 else FALSE
            self.trail.append(lit)
        return True

    def _propagate(self) -> bool:
        assign = self.assign
        clauses = self.clauses
        watches = self.watches
        while self.qhead < len(self.trail):
            false_lit = -self.trail[self.qhead]
            self.qhead += 1
            self.stats.propagations += 1
            slot = self._slot(false_lit)
            watching = watches[slot]
            kept = []
            conflict = False
            for pos, ci in enumerate(watching):
                clause = clauses[ci]
                if clause[0] == false_lit:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                first_value = assign[first] if first > 0 else -assign[-first]
                if first_value == TRUE:
                    kept.append(ci)
                    continue
                moved = False
                for k in range(2, len(clause)):
                    lit = clause[k]
                    if (assign[lit] if lit > 0 else -assign[-lit]) != FALSE:
                        clause[1], clause[k] = lit, false_lit
                        watches[self._slot(lit)].append(ci)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(ci)
                if first_value == FALSE:
                    kept.extend(watching[pos + 1:])
                    conflict = True
                    break
                self._enqueue(first)
            watches[slot] = kept
            if conflict:
                self.stats.conflicts += 1
                return False
        return True

    def _undo_to(self, size: int) -> None:
        for lit in self.trail[size:]:
            self.assign[abs(lit)] = UNASSIGNED
        del self.trail[size:]
        self.qhead = size

    def solve(self) -> SolveResult:
        if self.empty_clause or not all(self._enqueue(u) for u in self.units):
            return SolveResult(False, stats=self.stats)

        # each level: (trail size before the decision, decision literal, flipped, order position)
        levels = []
        cursor = 0
        ok = self._propagate()
        while True:
            if not ok:
                while levels:
                    start, lit, flipped, pos = levels.pop()
                    self._undo_to(start)
                    if not flipped:
                        levels.append((start, -lit, True, pos))
                        self._enqueue(-lit)
                        cursor = pos
                        break
                else:
                    logger.debug(f"UNSAT after {self.stats.decisions} decisions, {self.stats.conflicts} conflicts")
                    return SolveResult(False, stats=self.stats)
                ok = self._propagate()
                continue

            while cursor < len(self.order) and self.assign[self.order[cursor]] != UNASSIGNED:
                cursor += 1
            if cursor == len(self.order):
                model = {v: self.assign[v] == TRUE for v in range(1, self.num_vars + 1)}
                logger.debug(f"SAT after {self.stats.decisions} decisions, {self.stats.conflicts} conflicts")
                return SolveResult(True, model, self.stats)

            self.stats.decisions += 1
            if self.max_decisions is not None and self.stats.decisions > self.max_decisions:
                raise BudgetExceeded(f"solver exceeded {self.max_decisions} decisions")
            var = self.order[cursor]
            levels.append((len(self.trail), var, False, cursor))
            self._enqueue(var)
            ok = self._propagate()


def solve_cnf(num_vars: int, clauses: Sequence[Sequence[int]], max_decisions: Optional[int] = None) -> SolveResult:
    return DpllSolver(num_vars, clauses, max_decisions).solve()
