"""Kernel backend selection.

Hot numeric kernels are compiled with numba's ``@njit`` by default. Setting
``CORTICOSPIKE_BACKEND=numpy`` switches every kernel to its pure-numpy
fallback, which computes the same results (bit-identically wherever a fixed
summation order is part of the contract). The flag is read once at import
time; ``benchmarks/backend_bench.py`` times both paths side by side.
"""

import os

BACKEND_ENV = "CORTICOSPIKE_BACKEND"


def _resolve() -> str:
    choice = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:
            choice = "numpy"
    return choice


BACKEND = _resolve()
NUMBA_ENABLED = BACKEND == "numba"

if NUMBA_ENABLED:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """No-op decorator so kernel sources stay importable without numba."""
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap
