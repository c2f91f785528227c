"""Numba switch shared by the kernel modules.

Set ``GRIDPURSUIT_NO_JIT=1`` in the environment before import to run every
kernel through its pure-numpy / pure-Python path instead of the compiled one.
"""
import os

_FLAG = os.environ.get("GRIDPURSUIT_NO_JIT", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` with numba when enabled; otherwise return it untouched.

    The undecorated Python function is always reachable as ``.py_func`` so
    benchmarks and equivalence tests can call both routes side by side.
    """
    if numba is None:
        func.py_func = func
        return func
    compiled = numba.njit(cache=True, nogil=True)(func)
    if USE_NUMBA:
        return compiled
    func.py_func = func
    func.compiled = compiled
    return func


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
