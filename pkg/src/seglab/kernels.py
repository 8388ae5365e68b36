"""Kernel selection: compiled extension if importable, pure Python otherwise.

Set ``SEGLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SEGLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

sweep_1d = _impl.sweep_1d
sweep_2d = _impl.sweep_2d


def get_backend(name=None):
    """Return a module exposing ``sweep_1d``/``sweep_2d`` for ``name``."""
    if name in (None, "auto"):
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
