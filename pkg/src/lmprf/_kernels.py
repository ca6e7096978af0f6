"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
fallback in ``_core_py``.  Set ``LMPRF_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _core_py


def _load_compiled() -> ModuleType | None:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("LMPRF_PURE_PYTHON"):
    _impl: ModuleType = _compiled
    BACKEND = "cython"
else:
    _impl = _core_py
    BACKEND = "python"

accumulate_scores = _impl.accumulate_scores
sgd_project = _impl.sgd_project


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _core_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
