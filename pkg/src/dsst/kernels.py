"""Kernel backend selection.

The compiled extension is used when it imports; setting the environment
variable ``DSST_PURE_PYTHON=1`` forces the numpy fallback. ``use_backend``
switches at runtime (benchmarks and the cross-backend tests use it).
"""
from __future__ import annotations

import contextlib
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

_active = _fallback if (_compiled is None or os.environ.get("DSST_PURE_PYTHON")) else _compiled


def current():
    """Module providing the active kernels."""
    return _active


def backend_name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def set_backend(name: str):
    global _active
    try:
        _active = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(BACKENDS)}") from None


@contextlib.contextmanager
def use_backend(name: str):
    previous = backend_name()
    set_backend(name)
    try:
        yield current()
    finally:
        set_backend(previous)
