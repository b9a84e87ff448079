"""
Independent re-check of walk traces

Recomputes everything from the coloring with plain modular arithmetic, without
going through the ground-set, density or derived-coloring code the walker uses.
"""

from fractions import Fraction
from typing import List

from app.models.coloring import Coloring
from app.services.walker import WalkSuccess, WalkTrace, isolate_one


def _inv(a: int, p: int) -> int:
    return pow(a, p - 2, p)


def _prod(values, p: int) -> int:
    out = 1
    for v in values:
        out = out * v % p
    return out


def _expected_q(j: int, F, ys, p: int) -> set:
    values = set()
    for i in range(1, j + 1):
        numerator = _prod(ys[i - 1:j - 1], p)
        before = _prod(ys[:i - 1], p)
        for f in F:
            # F holds the shifts f; the walker divides by their inverses
            values.add(numerator * f * _inv(before, p) % p)
    return values


def check_trace(coloring: Coloring, trace: WalkTrace, distinct: bool = False) -> List[str]:
    """Problems found in the trace; an empty list means it checks out"""
    p = trace.p
    walked = isolate_one(coloring) if distinct else coloring
    problems = []

    for step in trace.steps:
        if step.density != Fraction(len(step.A), p):
            problems.append(f"step {step.j}: recorded density {step.density} != |A|/p")
        if not step.A_next <= step.A:
            problems.append(f"step {step.j}: A_next is not inside A")
        for x in step.A_next:
            for q in step.Q:
                if (x + q * step.y) % p not in step.A:
                    problems.append(f"step {step.j}: {x} + {q}*{step.y} leaves A")
                    break
        if step.y not in step.S:
            problems.append(f"step {step.j}: y={step.y} is not in the recorded S set")
        if step.bits and not all(step.bits.values()):
            problems.append(f"step {step.j}: recorded property bits {step.bits}")

    is_general = trace.branch is None
    if is_general and trace.steps:
        ys = [s.y for s in trace.steps]
        for step in trace.steps:
            if set(step.Q) != _expected_q(step.j, trace.F, ys, p):
                problems.append(f"step {step.j}: Q does not match the shift formula")
            running = _prod(ys[:step.j], p)
            for x in step.A_next:
                z = x * running % p
                for m, f in step.next_tuple.shifts:
                    if walked.color(z * _inv(f, p) % p) != m:
                        problems.append(f"step {step.j}: {x}*y_1..y_{step.j} is not in {f}*C_{m}")
                        break
        if trace.pair is not None:
            i, j = trace.pair
            tuples = trace.tuples
            if tuples[i - 1] != tuples[j - 1]:
                problems.append(f"pair {trace.pair} does not repeat a tuple")
            y = _prod(ys[i - 1:j - 1], p)
            if trace.y != y:
                problems.append(f"recorded y={trace.y}, product is {y}")
            if walked.color(y) not in trace.Ys[tuples[i - 1].l]:
                problems.append(f"y={y} lies outside the union of colors {sorted(trace.Ys[tuples[i - 1].l])}")

    if trace.monochromatic:
        for x in trace.xs:
            values = (x, trace.y, x * trace.y % p, (x + trace.y) % p)
            if x % p == 0 or trace.y % p == 0:
                problems.append(f"x={x} or y={trace.y} is zero")
            if len({coloring.color(v) for v in values}) != 1:
                problems.append(f"{values} is not monochromatic")
    return problems


def check_success(coloring: Coloring, result: WalkSuccess, distinct: bool = False) -> List[str]:
    problems = check_trace(coloring, result.trace, distinct)
    if result.x not in result.xs and result.xs:
        problems.append(f"x={result.x} is not among the reported x values")
    return problems
