"""Numba toggle.

Set ``PIPERETIME_NO_NUMBA=1`` to force the numpy fallback kernels.
"""
import os

_disabled = os.environ.get("PIPERETIME_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(fn):
    """Compile with numba when enabled, else return ``fn`` unchanged."""
    if HAVE_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
