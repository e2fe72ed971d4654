"""Kernel backend selection.

The hot numerical loops (Monte Carlo sweeps, annealing ramps, grid
searches) are compiled with numba when it is available.  Setting the
environment variable ``SEPWIT_BACKEND=numpy`` before import forces the
pure-Python/numpy fallback, which runs the identical source without JIT
compilation and produces bit-identical results (numba reproduces numpy's
legacy Mersenne-Twister streams).  ``SEPWIT_BACKEND=numba`` makes a
missing numba installation a hard error instead of a silent fallback.

``SEPWIT_NUM_THREADS`` caps numba's internal thread pool.  All sepwit
kernels are single-threaded and deterministic regardless of this value.
"""

import os

_CHOICE = os.environ.get("SEPWIT_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"SEPWIT_BACKEND must be 'auto', 'numba' or 'numpy', got {_CHOICE!r}"
    )

NUMBA_ENABLED = False
if _CHOICE in ("auto", "numba"):
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:
        if _CHOICE == "numba":
            raise

if NUMBA_ENABLED:
    _threads = os.environ.get("SEPWIT_NUM_THREADS", "").strip()
    if _threads:
        numba.set_num_threads(max(1, int(_threads)))

    def kernel(func):
        return numba.njit(cache=True)(func)

else:

    def kernel(func):
        return func


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"


def python_impl(func):
    """Return the uncompiled implementation of a kernel (for benchmarks)."""
    return getattr(func, "py_func", func)
