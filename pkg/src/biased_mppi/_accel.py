"""Numba switch.

Set ``BIASED_MPPI_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. Each hot kernel exists in two flavours: an ``@njit`` loop version and
a vectorised numpy version; callers dispatch on :data:`USE_NUMBA`.
"""

import os

_DISABLED = os.environ.get("BIASED_MPPI_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by BIASED_MPPI_DISABLE_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError:
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA


# numba's on-disk cache does not notice edits to callees in other modules
_CACHE = os.environ.get("BIASED_MPPI_NUMBA_CACHE", "").strip().lower() in {"1", "true", "yes", "on"}


def njit(fn):
    """``numba.njit`` when available, identity otherwise."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=_CACHE)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
