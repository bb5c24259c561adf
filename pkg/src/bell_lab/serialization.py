"""JSON and CSV plumbing shared by every file format.

Floats are written by ``repr``, the shortest text that parses back to the
same double, so tables round-trip bit-exactly. Joint indices are row-major
over parties in party order.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np


def _numpy_default(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize to JSON; NaN and infinities are rejected."""
    return json.dumps(obj, indent=indent, default=_numpy_default, allow_nan=False)


def loads(text: str) -> Any:
    return json.loads(text)


def party_columns(n_parties: int) -> tuple[list[str], list[str]]:
    """Column names for inputs and outcomes: x,y / a,b for two parties."""
    if n_parties == 2:
        return ["x", "y"], ["a", "b"]
    if n_parties == 3:
        return ["x", "y", "z"], ["a", "b", "c"]
    return [f"x{p}" for p in range(n_parties)], [f"a{p}" for p in range(n_parties)]


def load_schema(name: str) -> dict:
    """Shipped JSON Schema for a CLI output, by file stem under ``schemas/``."""
    from importlib import resources

    path = resources.files("bell_lab").joinpath("schemas", f"{name}.json")
    if not path.is_file():
        raise KeyError(f"no schema named {name!r}")
    return json.loads(path.read_text())
