"""
Product families: IP_r sets S[l][j] inside thick sets T_l such that every
product S[l_i][i] * S[l_{i+1}][i+1] * ... * S[l_j][j] stays inside T_{l_i}.

Columns are chosen backwards. P holds 1 and every product of consecutive later
columns; column j for label l is an IP_r set inside {t in T_l : t*P in T_l}.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from app.core.errors import ConstructionFailure, InternalVerificationError
from app.models.ground import Element, GroundSet
from app.services.structure import IPrWitness, ThickTestFamily, find_ipr_witness, is_thick

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProdFamily:
    sets: Tuple[Tuple[FrozenSet[Element], ...], ...]
    witnesses: Tuple[Tuple[IPrWitness, ...], ...]
    r: int

    @property
    def k(self) -> int:
        return len(self.sets)

    @property
    def N(self) -> int:
        return len(self.sets[0]) if self.sets else 0


def _products(left: Iterable[Element], right: Iterable[Element], ground: GroundSet) -> Set[Element]:
    right = list(right)
    return {ground.mul(a, b) for a in left for b in right}


def lemma_prod_construct(T: Sequence[Iterable[Element]], r: int, N: int, ambient: Sequence[Element],
                         ground: GroundSet, family: Optional[ThickTestFamily] = None,
                         order: Optional[Sequence[Element]] = None) -> ProdFamily:
    thick_sets = [frozenset(t) for t in T]
    k = len(thick_sets)
    if k == 0 or N < 1 or r < 1:
        raise ConstructionFailure(None, f"need k, N, r >= 1 (got k={k}, N={N}, r={r})")
    if family is not None:
        for l, t in enumerate(thick_sets):
            if is_thick(t, family, ambient, ground) is None:
                raise ConstructionFailure(None, f"T_{l} is not thick for the test family")

    one = ground.const(1)
    later = {one}
    sets: List[List[FrozenSet[Element]]] = [[frozenset()] * N for _ in range(k)]
    witnesses: List[List[Optional[IPrWitness]]] = [[None] * N for _ in range(k)]

    for j in range(N - 1, -1, -1):
        column = set()
        for l, t in enumerate(thick_sets):
            admissible = {u for u in t if all(ground.mul(u, q) in t for q in later)}
            witness = find_ipr_witness(admissible, r, admissible, ground, order=order)
            if witness is None:
                raise ConstructionFailure(j, f"no IP_{r} set among {len(admissible)} admissible elements of T_{l}")
            witnesses[l][j] = witness
            sets[l][j] = witness.fs(ground)
            column |= sets[l][j]
        later |= _products(column, later, ground)
        logger.debug(f"column {j}: {len(column)} elements, {len(later)} later products")

    family_out = ProdFamily(tuple(tuple(row) for row in sets), tuple(tuple(row) for row in witnesses), r)
    problem = verify_prod(family_out, thick_sets, ground)
    if problem:
        raise InternalVerificationError(f"product family failed its own check: {problem}")
    return family_out


def verify_prod(family: ProdFamily, T: Sequence[FrozenSet[Element]], ground: GroundSet) -> Optional[str]:
    """Exhaustive containment check over every i <= j and every label choice"""
    columns = [set().union(*(family.sets[l][j] for l in range(family.k))) for j in range(family.N)]
    for i in range(family.N):
        for l in range(family.k):
            current = set(family.sets[l][i])
            if not current <= T[l]:
                return f"S[{l}][{i}] is not inside T_{l}"
            for j in range(i + 1, family.N):
                current = _products(current, columns[j], ground)
                if not current <= T[l]:
                    return f"products from S[{l}][{i}] through column {j} leave T_{l}"
    return None
