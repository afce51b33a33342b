"""Central numba import.

Raises the numba thread cap before the first numba import so deterministic
runs can be replayed with any worker count (1..8) even on small machines;
SPREADSIM_WORKERS overrides the cap. All modules import njit/prange from here
so the cap is set exactly once.
"""
import os

_cap = max(os.cpu_count() or 1, 8, int(os.environ.get("SPREADSIM_WORKERS", "0") or 0))
os.environ.setdefault("NUMBA_NUM_THREADS", str(_cap))

from numba import njit, prange, get_num_threads, set_num_threads  # noqa: E402,F401


def max_threads() -> int:
    return int(os.environ["NUMBA_NUM_THREADS"])


def resolve_workers(requested: int) -> int:
    """Map a worker request to a usable numba thread count (0 = all cores)."""
    if requested <= 0:
        return min(os.cpu_count() or 1, max_threads())
    return min(requested, max_threads())
