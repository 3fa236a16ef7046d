"""Kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used.  DDP_PURE_PYTHON=1 forces the fallback.  Both backends
produce bit-identical output (asserted by the test suite), so selection
never changes results, only speed.
"""

from __future__ import annotations

import os

from . import _kernels_py

_FORCED_PY = os.environ.get("DDP_PURE_PYTHON") == "1"

if not _FORCED_PY:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
else:
    _compiled = None

ACTIVE_BACKEND = "compiled" if _compiled is not None else "python"

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available_backends() -> tuple:
    """Names of the importable kernel backends."""
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    """Return the kernel module for `name` ('python' or 'compiled')."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")


_active = _BACKENDS[ACTIVE_BACKEND]

convolve_rows = _active.convolve_rows
area_reduce_rows = _active.area_reduce_rows
