"""Backend selection for the hot kernels.

Set ``FRESCO_DISABLE_NUMBA=1`` to force the pure-numpy code paths even when
numba is importable. The choice is made once, at import time.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("FRESCO_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is available, else an identity decorator.

    Compilation is lazy, so wrapping a kernel costs nothing when the numpy
    path is selected.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old here; avoid the probe warning
    numba.config.THREADING_LAYER = "workqueue"

if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range
