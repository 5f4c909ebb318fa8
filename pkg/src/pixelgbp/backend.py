"""Kernel backend selection.

Two implementations of the per-sweep kernels exist: a vectorized pure-numpy
one and a serially-compiled numba one.  The active backend is chosen by the
``PIXELGBP_BACKEND`` environment variable (``auto``, ``numba``, ``numpy``)
or programmatically via :func:`set_backend`; ``auto`` prefers numba when it
imports cleanly.
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")
_forced: str | None = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def set_backend(name: str | None) -> None:
    """Force a backend regardless of the environment (None restores auto)."""
    global _forced
    if name is not None and name not in _VALID:
        raise ValueError(f"unknown backend {name!r}, expected one of {_VALID}")
    _forced = name


def selected_backend() -> str:
    """Resolve the backend actually in use ('numba' or 'numpy')."""
    choice = _forced or os.environ.get("PIXELGBP_BACKEND", "auto").lower()
    if choice not in _VALID:
        raise ValueError(
            f"PIXELGBP_BACKEND={choice!r} invalid, expected one of {_VALID}"
        )
    if choice == "auto":
        return "numba" if numba_available() else "numpy"
    if choice == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    return choice


def get_kernels():
    """Import and return the kernel module for the selected backend."""
    if selected_backend() == "numba":
        from . import _kernels_numba as k
    else:
        from . import _kernels_numpy as k
    return k
