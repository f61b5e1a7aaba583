"""Kernel backend selection.

The compiled Cython kernels are used when the extension is importable;
otherwise, or when ``NQSTATE_PURE_PYTHON=1`` is set, the pure-Python twins
are used. Both produce identical chains for identical random streams.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("NQSTATE_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as kernels
    BACKEND = "cython"
except ImportError:
    kernels = _kernels_py
    BACKEND = "python"


def get_kernels(name: str | None = None):
    """Return the kernel module for ``'cython'``, ``'python'`` or the default."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def available() -> list:
    """Backends that can be loaded in this installation."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names
