"""Switch between numba-compiled kernels and the plain numpy path.

Set ``DPMVS_NUMBA=0`` in the environment before import to run every kernel
as ordinary Python.  Both paths draw from the same ``numpy.random.Generator``
and produce identical chains; the fallback is only slower.
"""

import os

_flag = os.environ.get("DPMVS_NUMBA", "1").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def njit(func=None, **options):
    """``numba.njit(cache=True, nogil=True)`` or the identity decorator."""
    if func is None:
        return lambda f: njit(f, **options)
    if not USE_NUMBA:
        return func
    opts = {"cache": True, "nogil": True}
    opts.update(options)
    return numba.njit(**opts)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
