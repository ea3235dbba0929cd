"""JIT switch for the numeric kernels.

Kernels are written once, in numba's nopython subset. When numba is missing or
``FLASHX_DISABLE_JIT`` is set to a non-zero value, the decorator below is the
identity and the same source runs as plain Python over numpy arrays.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

JIT_DISABLED = os.environ.get("FLASHX_DISABLE_JIT", "0").strip() not in ("", "0")
USE_JIT = HAVE_NUMBA and not JIT_DISABLED


def njit(*args, **kwargs):
    if USE_JIT:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def _identity(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return _identity


def backend_name():
    return "numba" if USE_JIT else "python"
