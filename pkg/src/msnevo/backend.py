"""Kernel backend selection.

Two interchangeable implementations of the hot kernels exist:

* ``msnevo._kernels`` — Cython extension compiled at install time
* ``msnevo._kernels_py`` — pure NumPy fallback

The compiled one is preferred when importable. Set the environment variable
``MSNEVO_BACKEND`` to ``python`` or ``compiled`` before import to force a
choice (``compiled`` raises if the extension is missing), or call
:func:`set_backend` at runtime. Dense-layer matmuls are not routed through
here at all — they stay on NumPy's BLAS in both modes, where they belong.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; NumPy fallback only
    _compiled = None

_BACKENDS = {"python": _kernels_py, "compiled": _compiled}


def _initial():
    forced = os.environ.get("MSNEVO_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ValueError(f"MSNEVO_BACKEND must be 'python' or 'compiled', got {forced!r}")
        if _BACKENDS[forced] is None:
            raise ImportError("MSNEVO_BACKEND=compiled but the msnevo._kernels "
                              "extension is not built")
        return forced
    return "compiled" if _compiled is not None else "python"


_active_name = _initial()


def active_backend():
    """Name of the backend currently in use: 'compiled' or 'python'."""
    return _active_name


def available_backends():
    return [name for name, mod in _BACKENDS.items() if mod is not None]


def set_backend(name):
    """Switch kernel implementations at runtime (mainly for benchmarks/tests)."""
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if _BACKENDS[name] is None:
        raise ImportError(f"backend {name!r} is not available in this install")
    _active_name = name


def canberra(x, y):
    return _BACKENDS[_active_name].canberra(x, y)


def conv2d_forward(x, w, b, stride, padding):
    return _BACKENDS[_active_name].conv2d_forward(x, w, b, stride, padding)


def maxpool2d_forward(x, window, stride):
    return _BACKENDS[_active_name].maxpool2d_forward(x, window, stride)
