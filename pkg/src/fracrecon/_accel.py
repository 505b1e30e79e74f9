"""Switch between numba-compiled kernels and their pure-numpy twins.

Set ``FRACRECON_DISABLE_NUMBA=1`` to force the numpy path. The flag is read
on every dispatch so tests and benchmarks can flip it at runtime.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False


def use_numba():
    flag = os.environ.get("FRACRECON_DISABLE_NUMBA", "").strip().lower()
    return HAS_NUMBA and flag not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when available, else a no-op decorator."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
