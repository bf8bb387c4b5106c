"""JIT switch for the numeric kernels.

Set ``SUPERNEUMANN_NO_NUMBA=1`` (or run without numba installed) to execute
every kernel as plain Python.  Results are identical up to floating point
reassociation; only speed differs.
"""

import os

_DISABLED = os.environ.get("SUPERNEUMANN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:  # pragma: no cover - depends on environment
    if _DISABLED:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def jit(func):
    """Compile ``func`` with ``numba.njit`` unless the fallback is selected."""
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=False)(func)
    return func


def python_version(func):
    """Return the uncompiled implementation of a (possibly jitted) kernel."""
    return getattr(func, "py_func", func)
