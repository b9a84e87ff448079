# JSON conversion for results, traces and certificates

import dataclasses
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np


def _sort_key(value: Any):
    return (0, value) if isinstance(value, (int, Fraction)) else (1, str(value))


def to_jsonable(obj: Any) -> Any:
    """Fractions become strings, sets become sorted lists, dataclasses become dicts"""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, float):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if hasattr(obj, "spec") and not isinstance(obj, type):
        return obj.spec
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(to_jsonable(k)) if not isinstance(k, str) else k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(obj, key=_sort_key)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return str(obj)
