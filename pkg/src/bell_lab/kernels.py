"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels``. Set ``BELL_LAB_PURE=1`` to force the
fallback. Both produce identical results for identical arguments.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("BELL_LAB_PURE"):
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pykernels

BACKEND: str = _impl.BACKEND

round_key = _impl.round_key
uniforms = _impl.uniforms
draw_table = _impl.draw_table
tally_table = _impl.tally_table
strategy_values = _impl.strategy_values


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def backends() -> dict:
    """Every importable backend module keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
