"""Kernel backend selection.

The compiled Cython core is used when it imports; otherwise the numpy fallback.
Set ``SPINCONV_PURE_PYTHON=1`` before import to force the fallback, or call
:func:`use` at runtime (the benchmark does this to compare both).
"""
import os

from . import _fallback

try:
    if os.environ.get("SPINCONV_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"


def available():
    return tuple(_BACKENDS)


def name():
    return _active


def kernels():
    return _BACKENDS[_active]


def use(backend):
    """Switch the active kernel backend; returns the previous name."""
    global _active
    if backend not in _BACKENDS:
        raise ValueError(f"backend {backend!r} not available (have {available()})")
    prev, _active = _active, backend
    return prev
