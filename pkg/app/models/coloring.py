"""
Colorings: total maps from a ground set to colors 0..n-1, stored as a tuple
aligned with the ground's enumeration order.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import FrozenSet, List, Sequence, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.models.ground import Element, GroundSet, PrimeField

logger = logging.getLogger(__name__)

MAX_COLORS = 64


@dataclass(frozen=True)
class Coloring:
    ground: GroundSet
    n: int
    colors: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "colors", tuple(int(c) for c in self.colors))
        if len(self.colors) != len(self.ground):
            raise ConfigError("coloring", f"expected {len(self.ground)} colors, got {len(self.colors)}")
        if not 1 <= self.n <= MAX_COLORS:
            raise ConfigError("colors", f"n must lie in 1..{MAX_COLORS}, got {self.n}")
        if any(c < 0 or c >= self.n for c in self.colors):
            raise ConfigError("coloring", f"colors must lie in 0..{self.n - 1}")

    def color(self, x: Element) -> int:
        return self.colors[self.ground.index[x]]

    def __getitem__(self, x: Element) -> int:
        return self.color(x)

    @cached_property
    def classes(self) -> Tuple[FrozenSet[Element], ...]:
        buckets: List[List[Element]] = [[] for _ in range(self.n)]
        for e, c in zip(self.ground.elements, self.colors):
            buckets[c].append(e)
        return tuple(frozenset(b) for b in buckets)


def mono_coloring(ground: GroundSet, n: int = 1) -> Coloring:
    return Coloring(ground, n, (0,) * len(ground))


def random_coloring(ground: GroundSet, n: int, seed: int = 0) -> Coloring:
    rng = np.random.default_rng(seed)
    return Coloring(ground, n, tuple(rng.integers(0, n, size=len(ground)).tolist()))


def residue_coloring(ground: GroundSet) -> Coloring:
    """Quadratic residues (with 0) get color 0, non-residues color 1"""
    if not isinstance(ground, PrimeField):
        raise ConfigError("coloring", "residue coloring needs a prime field ground")
    residues = {x * x % ground.p for x in range(ground.p)}
    return Coloring(ground, 2, tuple(0 if e in residues else 1 for e in ground.elements))


def coloring_from_classes(ground: GroundSet, classes: Sequence[Sequence[Element]]) -> Coloring:
    """Build from explicit classes; elements left out get the last color"""
    colors = [len(classes) - 1] * len(ground)
    for c, members in enumerate(classes):
        for x in members:
            colors[ground.index[x]] = c
    return Coloring(ground, len(classes), tuple(colors))


def load_coloring(path: str, ground: GroundSet, n: int) -> Coloring:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError("coloring", f"cannot read {path}: {e}")
    colors = data["colors"] if isinstance(data, dict) else data
    return Coloring(ground, n, tuple(colors))


def make_coloring(source: str, ground: GroundSet, n: int, seed: int = 0) -> Coloring:
    """`random`, `mono`, `residue` or `file:PATH`"""
    if source == "random":
        return random_coloring(ground, n, seed)
    if source == "mono":
        return mono_coloring(ground, n)
    if source == "residue":
        return residue_coloring(ground)
    if source.startswith("file:"):
        return load_coloring(source[5:], ground, n)
    raise ConfigError("coloring", f"unknown coloring source '{source}'")
