"""Kernel backend selection.

The hot kernels (Fock-space matrix assembly, row binary search) are compiled
with numba when it is available.  Setting the environment variable
``BOGOSCOPE_BACKEND=numpy`` forces the pure-numpy implementations instead;
``BOGOSCOPE_BACKEND=numba`` demands the compiled path and raises if numba
cannot be imported.  The flag is read once at import time.
"""

from __future__ import annotations

import os
import warnings

_VALID = ("", "numba", "numpy")
_choice = os.environ.get("BOGOSCOPE_BACKEND", "").strip().lower()
if _choice not in _VALID:
    raise RuntimeError(
        f"BOGOSCOPE_BACKEND must be one of 'numba' or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    HAS_NUMBA = False
else:
    try:
        # workqueue is always present and schedules deterministically; the
        # row-parallel kernels are order-independent, so this only silences
        # threading-layer probing noise
        os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False
        if _choice == "numba":
            raise
        warnings.warn(
            "numba not importable; falling back to the pure-numpy kernels "
            "(set BOGOSCOPE_BACKEND=numpy to silence)"
        )

BACKEND = "numba" if HAS_NUMBA else "numpy"

if HAS_NUMBA:
    from numba import prange
else:
    prange = range


def njit(*args, **kwargs):
    """numba.njit when the compiled backend is active, identity otherwise."""
    if HAS_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)
    # pass-through decorator; works both as @njit and @njit(...)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap
