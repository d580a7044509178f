"""Optional numba acceleration.

Set ``CIO_DISABLE_NUMBA=1`` to run every kernel as plain numpy/Python.  The
kernels are written in the subset of numpy that numba understands, so both
paths execute the same source.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("CIO_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def njit(func):
    """Compile ``func`` with numba when enabled, otherwise return it unchanged."""
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=False)(func)
    return func


def python_version(func):
    """Return the uncompiled Python function behind a (possibly) jitted kernel."""
    return getattr(func, "py_func", func)
