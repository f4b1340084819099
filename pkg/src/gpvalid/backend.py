"""Backend selection for the numerical hot paths.

Every compute-heavy inner loop in this package exists in two forms: a
numba ``@njit`` kernel and a pure-numpy (or pure-Python scalar) fallback.
Which one runs is decided once, at import time, by the environment
variable ``GPVALID_BACKEND``:

    GPVALID_BACKEND=numba   use numba JIT kernels (default when numba imports)
    GPVALID_BACKEND=numpy   force the fallback path

``python -m gpvalid.benchmark`` times both paths in subprocesses.
"""

import os

_requested = os.environ.get("GPVALID_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"GPVALID_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    USING_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        USING_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        USING_NUMBA = False

BACKEND = "numba" if USING_NUMBA else "numpy"


def jit_or_python(func):
    """Compile ``func`` with numba when the numba backend is active,
    otherwise return it unchanged.

    Functions decorated with this may call each other freely: under numba
    the module globals hold Dispatcher objects, under the fallback they
    hold the plain Python functions.
    """
    if USING_NUMBA:
        from numba import njit

        return njit(cache=True)(func)
    return func
