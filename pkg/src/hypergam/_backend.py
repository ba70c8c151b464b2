"""Numba/numpy backend selection.

The hot numeric kernels in :mod:`hypergam._kernels` are compiled with numba
unless the environment variable ``HYPERGAM_NUMBA`` is set to ``0``, ``false``
or ``off``, in which case pure numpy/scipy implementations are used instead.
``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os


def _flag_enabled(value: str) -> bool:
    return value.strip().lower() not in ("0", "false", "off", "no")


USE_NUMBA = _flag_enabled(os.environ.get("HYPERGAM_NUMBA", "1"))

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if USE_NUMBA:
    def jit(func):
        """Compile ``func`` with numba in nopython mode."""
        return numba.njit(cache=True)(func)
else:
    def jit(func):
        """No-op decorator used when the numpy fallback path is active."""
        return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
