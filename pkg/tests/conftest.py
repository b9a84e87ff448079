import itertools

import pytest

from app.models.coloring import Coloring
from app.models.ground import GroundSet
from app.models.templates import PatternTemplate
from app.services.search import is_avoiding


def brute_force_avoidable(ground: GroundSet, n: int, template: PatternTemplate) -> bool:
    """Try every n-coloring; only for tiny grounds"""
    for colors in itertools.product(range(n), repeat=len(ground)):
        if is_avoiding(Coloring(ground, n, colors), template):
            return True
    return False


@pytest.fixture
def avoidable():
    return brute_force_avoidable


@pytest.fixture
def registry_path(tmp_path):
    return str(tmp_path / "runs.jsonl")
