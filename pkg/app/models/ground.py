"""
Finite ground sets

Three arenas share one interface: integer intervals [lo..hi], prime fields F_p
and bounded rational grids {a/b : |a| <= maxNumerator, 1 <= b <= maxDenominator}.
Prime-field arithmetic is closed (least nonnegative residues); the other two
compute exactly and may leave the set, which callers observe through contains().
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Optional, Tuple, Union

from sympy import isprime

from app.core.errors import ConfigError

Element = Union[int, Fraction]


def _as_exact(value: Element) -> Element:
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value.numerator)
    return value


class GroundSet:
    """Common interface; subclasses are frozen dataclasses"""

    closed: bool = False

    @cached_property
    def elements(self) -> Tuple[Element, ...]:
        return tuple(self._enumerate())

    @cached_property
    def index(self) -> Dict[Element, int]:
        return {e: i for i, e in enumerate(self.elements)}

    @cached_property
    def nonzero_elements(self) -> Tuple[Element, ...]:
        return tuple(e for e in self.elements if e != 0)

    def __len__(self) -> int:
        return len(self.elements)

    def _enumerate(self):
        raise NotImplementedError

    def contains(self, value: Element) -> bool:
        return value in self.index

    def add(self, a: Element, b: Element) -> Element:
        return _as_exact(a + b)

    def mul(self, a: Element, b: Element) -> Element:
        return _as_exact(a * b)

    def const(self, value: Fraction) -> Optional[Element]:
        """Embed a rational constant; None when it has no image in this arena"""
        return _as_exact(Fraction(value))

    def inverse(self, a: Element) -> Element:
        return _as_exact(1 / Fraction(a))

    def div(self, a: Element, b: Element) -> Element:
        return self.mul(a, self.inverse(b))

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True, eq=True)
class IntegerInterval(GroundSet):
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ConfigError("ground", f"empty interval {self.lo}..{self.hi}")

    def _enumerate(self):
        return range(self.lo, self.hi + 1)

    def contains(self, value: Element) -> bool:
        if isinstance(value, Fraction):
            if value.denominator != 1:
                return False
            value = value.numerator
        return self.lo <= value <= self.hi

    @property
    def spec(self) -> str:
        return f"int:{self.lo}..{self.hi}"


@dataclass(frozen=True, eq=True)
class PrimeField(GroundSet):
    p: int
    closed = True

    def __post_init__(self):
        if not isprime(self.p):
            raise ConfigError("ground", f"{self.p} is not prime")

    def _enumerate(self):
        return range(self.p)

    def contains(self, value: Element) -> bool:
        return isinstance(value, int) and 0 <= value < self.p

    def add(self, a: Element, b: Element) -> Element:
        return (a + b) % self.p

    def mul(self, a: Element, b: Element) -> Element:
        return (a * b) % self.p

    def const(self, value: Fraction) -> Optional[Element]:
        value = Fraction(value)
        if value.denominator % self.p == 0:
            return None
        return value.numerator * pow(value.denominator, -1, self.p) % self.p

    def inverse(self, a: Element) -> Element:
        return pow(a, -1, self.p)

    @property
    def spec(self) -> str:
        return f"fp:{self.p}"


@dataclass(frozen=True, eq=True)
class RationalGrid(GroundSet):
    max_numerator: int
    max_denominator: int

    def __post_init__(self):
        if self.max_numerator < 1 or self.max_denominator < 1:
            raise ConfigError("ground", "rational grid bounds must be positive")

    def _enumerate(self):
        values = {
            _as_exact(Fraction(a, b))
            for a in range(-self.max_numerator, self.max_numerator + 1)
            for b in range(1, self.max_denominator + 1)
        }
        return sorted(values)

    def contains(self, value: Element) -> bool:
        value = Fraction(value)
        return abs(value.numerator) <= self.max_numerator and value.denominator <= self.max_denominator

    @property
    def spec(self) -> str:
        return f"qgrid:{self.max_numerator}/{self.max_denominator}"


_INT_SPEC = re.compile(r"^int:(-?\d+)\.\.(-?\d+)$")
_FP_SPEC = re.compile(r"^fp:(\d+)$")
_QGRID_SPEC = re.compile(r"^qgrid:(\d+)/(\d+)$")


def parse_ground(spec: str) -> GroundSet:
    """Parse `int:LO..HI`, `fp:P` or `qgrid:MAXNUM/MAXDEN`"""
    spec = spec.strip()
    if m := _INT_SPEC.match(spec):
        return IntegerInterval(int(m.group(1)), int(m.group(2)))
    if m := _FP_SPEC.match(spec):
        return PrimeField(int(m.group(1)))
    if m := _QGRID_SPEC.match(spec):
        return RationalGrid(int(m.group(1)), int(m.group(2)))
    raise ConfigError("ground", f"unrecognised ground spec '{spec}'")


def parse_element(text: str) -> Element:
    return _as_exact(Fraction(text.strip()))
