"""
Instance enumeration, monochromatic search and counting

Instances are ordered variable assignments taken in lexicographic order of the
ground's enumeration; the instance list of a (template, ground) pair is cached.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

from app.models.coloring import Coloring
from app.models.ground import GroundSet
from app.models.templates import Instance, PatternTemplate, Rejected, compile_template

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonochromaticCount:
    per_color: Tuple[int, ...]
    total: int


@lru_cache(maxsize=32)
def valid_instances(template: PatternTemplate, ground: GroundSet) -> Tuple[Instance, ...]:
    evaluate = compile_template(template, ground)
    found = []
    for assignment in itertools.product(ground.elements, repeat=template.num_vars):
        values = evaluate(assignment)
        if not isinstance(values, Rejected):
            found.append(Instance(assignment, values))
    logger.debug(f"{template.label} on {ground.spec}: {len(found)} instances")
    return tuple(found)


@lru_cache(maxsize=32)
def instance_value_sets(template: PatternTemplate, ground: GroundSet) -> Tuple[Tuple[int, ...], ...]:
    """Distinct element-index sets of the instances, first occurrence order"""
    index = ground.index
    seen = set()
    sets = []
    for instance in valid_instances(template, ground):
        members = tuple(sorted({index[v] for v in instance.term_values}))
        if members not in seen:
            seen.add(members)
            sets.append(members)
    return tuple(sets)


def monochromatic_color(coloring: Coloring, instance: Instance) -> Optional[int]:
    color = coloring.color
    first = color(instance.term_values[0])
    for v in instance.term_values[1:]:
        if color(v) != first:
            return None
    return first


def find_instances(coloring: Coloring, template: PatternTemplate, limit: Optional[int] = None) -> List[Tuple[Instance, int]]:
    found = []
    for instance in valid_instances(template, coloring.ground):
        c = monochromatic_color(coloring, instance)
        if c is not None:
            found.append((instance, c))
            if limit is not None and len(found) >= limit:
                break
    return found


def count_monochromatic(coloring: Coloring, template: PatternTemplate) -> MonochromaticCount:
    per_color = [0] * coloring.n
    for instance in valid_instances(template, coloring.ground):
        c = monochromatic_color(coloring, instance)
        if c is not None:
            per_color[c] += 1
    return MonochromaticCount(tuple(per_color), sum(per_color))


def is_avoiding(coloring: Coloring, template: PatternTemplate) -> bool:
    return not find_instances(coloring, template, limit=1)
