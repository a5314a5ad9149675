"""Kernel backend selection.

The compiled ``_core`` extension is used when importable. Setting
``DIFFRF_BACKEND=python`` forces the NumPy fallback.
"""

import os

from . import _pycore

if os.environ.get("DIFFRF_BACKEND", "").lower() == "python":
    kernels = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _pycore
        BACKEND = "python"


def get(name):
    """Return the kernel module for ``name`` ('cython', 'python' or 'auto')."""
    if name == "auto":
        return kernels
    if name == "python":
        return _pycore
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
