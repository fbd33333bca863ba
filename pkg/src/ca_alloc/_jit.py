"""Numba switch.

Set ``CA_ALLOC_DISABLE_JIT=1`` to run every kernel through its pure-numpy
twin instead of the compiled loop version. Also honoured when numba is not
importable.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships with the test image
    numba = None
    HAVE_NUMBA = False


def jit_requested() -> bool:
    flag = os.environ.get("CA_ALLOC_DISABLE_JIT", "").strip().lower()
    return HAVE_NUMBA and flag not in ("1", "true", "yes", "on")


USE_JIT = jit_requested()


def njit(*args, **kwargs):
    if HAVE_NUMBA:
        return numba.njit(*args, cache=True, **kwargs)

    def deco(func):
        return func

    return deco
