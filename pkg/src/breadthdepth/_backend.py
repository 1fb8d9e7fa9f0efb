"""Kernel backend selection.

``BREADTHDEPTH_BACKEND=numpy`` forces the pure-numpy kernels; ``numba`` (the
default when numba imports) uses the jitted ones. Both backends consume the
same pre-drawn random arrays, so seeded results do not depend on the backend.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_requested = os.environ.get("BREADTHDEPTH_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"BREADTHDEPTH_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
