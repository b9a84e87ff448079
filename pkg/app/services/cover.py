"""
Cover decomposition of a finite coloring

Given color classes C_0..C_{n-1} of a multiplicative ambient set and a width
bound f, find index sets Y_1..Y_k and a finite shift set F such that every union
of the classes in some Y_l is thick (against a test family) and every x lies in
f_m*C_m for all m of some Y_l. The construction goes through the family of
f-syndetic unions and its dual; the result is re-verified by verify_cover,
which only uses the coloring and ground arithmetic.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from app.core.errors import CoverFailure, InternalVerificationError
from app.models.coloring import Coloring
from app.models.ground import Element, GroundSet
from app.services.structure import (
    ThickTestFamily, default_ambient, default_thick_family, is_syndetic, is_thick, ordered,
)

logger = logging.getLogger(__name__)

ColorSet = FrozenSet[int]


@dataclass
class CoverDecomposition:
    width: int
    Ys: Tuple[ColorSet, ...]
    F: Tuple[Element, ...]
    ambient: Tuple[Element, ...]
    assignment: Dict[Element, int]
    shifts: Dict[Element, Dict[int, Element]]
    thickness: Tuple[Dict[FrozenSet[Element], Element], ...]
    syndetic: Dict[ColorSet, Tuple[Element, ...]] = field(default_factory=dict)
    thick_index: Tuple[ColorSet, ...] = ()

    @property
    def k(self) -> int:
        return len(self.Ys)

    def union(self, l: int, coloring: Coloring) -> FrozenSet[Element]:
        members = set()
        for m in self.Ys[l]:
            members |= coloring.classes[m]
        return frozenset(members) & frozenset(self.ambient)

    def summary(self) -> Dict:
        return {
            "k": self.k,
            "Ys": [sorted(Y) for Y in self.Ys],
            "F": list(self.F),
            "syndetic": {",".join(map(str, sorted(Y))): list(F) for Y, F in self.syndetic.items()},
        }


def _color_key(Y: ColorSet) -> Tuple[int, ...]:
    return tuple(sorted(Y))


def _in_shifted_class(x: Element, f: Element, cls: FrozenSet[Element], ground: GroundSet) -> bool:
    """x in f*C, via c = x/f"""
    c = ground.div(x, f)
    return ground.contains(c) and c in cls


def cover_decomposition(coloring: Coloring, width: int, ambient: Optional[Sequence[Element]] = None,
                        family: Optional[ThickTestFamily] = None) -> CoverDecomposition:
    ground = coloring.ground
    ambient = tuple(ambient if ambient is not None else default_ambient(ground))
    members = set(ambient)
    classes = [c & members for c in coloring.classes]
    n = coloring.n
    every = frozenset(range(n))

    all_Y = [frozenset(c) for size in range(1, n + 1) for c in itertools.combinations(range(n), size)]
    syndetic = {}
    for Y in all_Y:
        union = set().union(*(classes[m] for m in Y))
        witness = is_syndetic(union, width, ambient, ground)
        if witness is not None:
            syndetic[Y] = witness.F
    if not syndetic:
        raise CoverFailure(None, f"no union of color classes is {width}-syndetic")

    F = tuple(ordered(set().union(*syndetic.values()), ground))
    thick_index = tuple(sorted((Y for Y in all_Y if every - Y not in syndetic), key=_color_key))
    logger.info(f"Cover: {len(syndetic)} syndetic unions, |F|={len(F)}, {len(thick_index)} dual index sets")

    chosen: Dict[Element, ColorSet] = {}
    shifts: Dict[Element, Dict[int, Element]] = {}
    for x in ambient:
        hits = {}
        for m in range(n):
            f = next((f for f in F if _in_shifted_class(x, f, classes[m], ground)), None)
            if f is not None:
                hits[m] = f
        A_x = frozenset(hits)
        Y_x = next((Y for Y in thick_index if Y <= A_x), None)
        if Y_x is None:
            raise CoverFailure(x, f"A_x={sorted(A_x)} contains no dual index set")
        chosen[x] = Y_x
        shifts[x] = {m: hits[m] for m in sorted(Y_x)}

    Ys = tuple(sorted(set(chosen.values()), key=_color_key))
    position = {Y: l for l, Y in enumerate(Ys)}
    assignment = {x: position[Y] for x, Y in chosen.items()}

    if family is None:
        family = default_thick_family(ambient, width, ground)
    thickness = []
    for Y in Ys:
        union = set().union(*(classes[m] for m in Y))
        certificate = is_thick(union, family, ambient, ground)
        if certificate is None:
            raise CoverFailure(None, f"union of colors {sorted(Y)} is not thick for the test family")
        thickness.append(certificate)

    cover = CoverDecomposition(width, Ys, F, ambient, assignment, shifts, tuple(thickness), syndetic, thick_index)
    problems = verify_cover(coloring, cover, family)
    if problems:
        raise InternalVerificationError(f"cover decomposition failed its own check: {problems[0]}", payload=problems)
    logger.info(f"Cover decomposition: k={cover.k}, Ys={[sorted(Y) for Y in Ys]}")
    return cover


def verify_cover(coloring: Coloring, cover: CoverDecomposition, family: ThickTestFamily) -> List[str]:
    """Both postconditions, checked from the coloring alone; returns the problems found"""
    ground = coloring.ground
    problems = []

    for l, (Y, certificate) in enumerate(zip(cover.Ys, cover.thickness)):
        for F_test in family.sets:
            a = certificate.get(F_test)
            if a is None:
                problems.append(f"Y_{l}: no shift recorded for {sorted(F_test)}")
                continue
            for g in F_test:
                value = ground.mul(a, g)
                if not ground.contains(value) or coloring.color(value) not in Y:
                    problems.append(f"Y_{l}: {a}*{g} leaves the union of colors {sorted(Y)}")
                    break

    F = set(cover.F)
    for x in cover.ambient:
        l = cover.assignment.get(x)
        if l is None:
            problems.append(f"x={x} has no index set")
            continue
        for m in cover.Ys[l]:
            f = cover.shifts[x].get(m)
            if f is None or f not in F:
                problems.append(f"x={x}: no shift from F for color {m}")
                continue
            c = ground.div(x, f)
            if not ground.contains(c) or ground.mul(f, c) != x or coloring.color(c) != m:
                problems.append(f"x={x} is not in {f}*C_{m}")
    return problems
