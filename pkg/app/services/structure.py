"""
Finite sums, IP_r witnesses, and multiplicative syndeticity / thickness tests

Sets are plain Python sets of ground elements. Syndetic and thick searches work
on integer bitmasks over the positions of the ambient sequence, so the inner
loops are bitwise ands and ors.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from app.core.errors import ConfigError, OutOfGroundError
from app.models.ground import Element, GroundSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IPrWitness:
    sequence: Tuple[Element, ...]

    @property
    def r(self) -> int:
        return len(self.sequence)

    def fs(self, ground: GroundSet) -> FrozenSet[Element]:
        return fs_set(self.sequence, ground)

    def scaled(self, t: Element, ground: GroundSet) -> "IPrWitness":
        return IPrWitness(tuple(ground.mul(t, a) for a in self.sequence))


@dataclass(frozen=True)
class SyndeticWitness:
    F: Tuple[Element, ...]


@dataclass(frozen=True)
class ThickTestFamily:
    sets: Tuple[FrozenSet[Element], ...]

    def __post_init__(self):
        if not self.sets or any(not s for s in self.sets):
            raise ConfigError("thick_family", "test family must be nonempty with nonempty members")

    def __len__(self) -> int:
        return len(self.sets)


def ordered(elements: Iterable[Element], ground: GroundSet) -> List[Element]:
    return sorted(elements, key=ground.index.__getitem__)


def default_ambient(ground: GroundSet) -> Tuple[Element, ...]:
    return ground.nonzero_elements


def default_thick_family(ambient: Sequence[Element], width: int, ground: GroundSet,
                         generators: int = 0, progression: int = 0) -> ThickTestFamily:
    """All subsets of size <= width of the generator set, plus {g^0..g^(m-1)} for each generator"""
    gens = list(ambient[:generators]) if generators else list(ambient)
    sets = []
    for size in range(1, width + 1):
        sets.extend(frozenset(c) for c in itertools.combinations(gens, size))
    if progression > 0:
        for g in gens:
            powers, value = [], ground.const(1)
            for _ in range(progression):
                powers.append(value)
                value = ground.mul(value, g)
            sets.append(frozenset(powers))
    return ThickTestFamily(tuple(dict.fromkeys(sets)))


# ================================
# FINITE SUMS AND IP_r
# ================================

def fs_set(sequence: Sequence[Element], ground: GroundSet) -> FrozenSet[Element]:
    """Sums over all nonempty subsequences, as a set of values"""
    if not sequence:
        raise ConfigError("sequence", "fs_set needs a nonempty sequence")
    sums = set()
    for a in sequence:
        extended = {a} | {ground.add(s, a) for s in sums}
        for value in extended:
            if not ground.contains(value):
                raise OutOfGroundError(value, ground.spec)
        sums |= extended
    return frozenset(sums)


def find_ipr_witness(S: Iterable[Element], r: int, search_space: Iterable[Element], ground: GroundSet,
                     distinct_sums: bool = False, order: Optional[Sequence[Element]] = None) -> Optional[IPrWitness]:
    """
    First nondecreasing sequence (in enumeration order, or `order` when given) of
    r nonzero elements of search_space whose 2^r - 1 subset sums all lie in S.
    Entries may repeat and sums may coincide unless distinct_sums is set.
    """
    target = set(S)
    candidates = [e for e in (order if order is not None else ordered(set(search_space), ground))
                  if e != 0 and e in target]
    if order is not None:
        space = set(search_space)
        candidates = [e for e in candidates if e in space]
    if r < 1:
        return None

    chosen: List[Element] = []

    def extend(start: int, sums: FrozenSet[Element]) -> bool:
        if len(chosen) == r:
            return True
        for pos in range(start, len(candidates)):
            a = candidates[pos]
            new = {a} | {ground.add(s, a) for s in sums}
            if not new <= target:
                continue
            if distinct_sums and (len(new) != len(sums) + 1 or new & sums):
                continue
            chosen.append(a)
            if extend(pos, sums | new):
                return True
            chosen.pop()
        return False

    if extend(0, frozenset()):
        return IPrWitness(tuple(chosen))
    return None


def is_ipr_star(S: Iterable[Element], r: int, ambient: Iterable[Element],
                ground: GroundSet) -> Tuple[bool, Optional[IPrWitness]]:
    """True iff S meets every IP_r set inside ambient; otherwise a refuting witness"""
    complement = set(ambient) - set(S)
    witness = find_ipr_witness(complement, r, complement, ground)
    return witness is None, witness


# ================================
# SYNDETIC / THICK
# ================================

def _mask(elements: Iterable[Element], positions: Dict[Element, int]) -> int:
    mask = 0
    for e in elements:
        pos = positions.get(e)
        if pos is not None:
            mask |= 1 << pos
    return mask


def is_syndetic(S: Iterable[Element], width: int, ambient: Sequence[Element],
                ground: GroundSet) -> Optional[SyndeticWitness]:
    """Smallest F (ties lexicographic) with |F| <= width and F*S covering ambient"""
    S = [s for s in S if s != 0]
    ambient = list(ambient)
    if not S or not ambient:
        return None
    positions = {e: i for i, e in enumerate(ambient)}
    full = (1 << len(ambient)) - 1
    shifted = [_mask((ground.mul(g, s) for s in S), positions) for g in ambient]

    for size in range(1, width + 1):
        if size * len(S) < len(ambient):
            continue
        for combo in itertools.combinations(range(len(ambient)), size):
            cover = 0
            for i in combo:
                cover |= shifted[i]
            if cover == full:
                return SyndeticWitness(tuple(ambient[i] for i in combo))
    return None


def thickness_masks(T: Iterable[Element], ambient: Sequence[Element], ground: GroundSet,
                     generators: Optional[Iterable[Element]] = None) -> Dict[Element, int]:
    """For every generator g (default: ambient), the mask of shifts a with a*g in T"""
    T = set(T)
    masks = {}
    for g in (ambient if generators is None else generators):
        mask = 0
        for pos, a in enumerate(ambient):
            if ground.mul(a, g) in T:
                mask |= 1 << pos
        masks[g] = mask
    return masks


def is_thick(T: Iterable[Element], family: ThickTestFamily, ambient: Sequence[Element],
             ground: GroundSet) -> Optional[Dict[FrozenSet[Element], Element]]:
    """Least shift a (enumeration order) with a*F inside T, for every F in family"""
    ambient = list(ambient)
    T = set(T)
    masks = thickness_masks(T, ambient, ground)
    shifts = {}
    for F in family.sets:
        mask = (1 << len(ambient)) - 1
        for g in F:
            if g not in masks:
                masks.update(thickness_masks(T, ambient, ground, generators=[g]))
            mask &= masks[g]
            if not mask:
                break
        if not mask:
            return None
        shifts[F] = ambient[(mask & -mask).bit_length() - 1]
    return shifts
