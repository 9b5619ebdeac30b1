"""Numeric backend selection.

The solver and fitting kernels are written as plain numpy functions and are
JIT-compiled with numba when available.  Set the environment variable
``SOFTFLOW_BACKEND`` to ``numpy`` to force the un-jitted fallback (useful for
debugging and for the backend benchmark), or to ``numba`` to fail loudly when
numba cannot be imported.  The default (``auto``) uses numba when it imports.
"""

import os

_ENV_VAR = "SOFTFLOW_BACKEND"
_choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"{_ENV_VAR} must be one of 'auto', 'numba' or 'numpy', got {_choice!r}"
    )

NUMBA_ENABLED = False
if _choice in ("auto", "numba"):
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _choice == "numba":
            raise RuntimeError(f"{_ENV_VAR}=numba but numba is not importable")


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def jit(func):
    """Compile ``func`` in nopython mode, or return it unchanged.

    Both paths run the exact same source, so results differ only by the
    floating-point behaviour of the underlying LAPACK builds.
    """
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(func)
    return func
