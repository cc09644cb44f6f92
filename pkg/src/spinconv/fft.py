"""Minimal pluggable 1-D complex FFT interface used by the transforms.

``scipy.fft`` is the default because it keeps single precision inputs in single
precision; ``numpy.fft`` is available as an alternative.
"""
from __future__ import annotations

import numpy as np
import scipy.fft

_BACKENDS = {
    "scipy": (scipy.fft.fft, scipy.fft.ifft),
    "numpy": (np.fft.fft, np.fft.ifft),
}
_active = "scipy"
_workers = None


def set_backend(name: str) -> str:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown FFT backend {name!r}")
    prev, _active = _active, name
    return prev


def get_backend() -> str:
    return _active


def set_workers(n: int | None):
    """Thread count for the scipy backend (None = library default)."""
    global _workers
    if n is not None and n < 1:
        raise ValueError("workers must be >= 1")
    _workers = n


def _kw():
    return {"workers": _workers} if _active == "scipy" and _workers else {}


def fft(x, axis=-1):
    return _BACKENDS[_active][0](x, axis=axis, **_kw())


def ifft(x, axis=-1):
    return _BACKENDS[_active][1](x, axis=axis, **_kw())
