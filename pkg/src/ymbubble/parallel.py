"""Deterministic chunked evaluation.

Work is split into chunks whose boundaries depend only on the problem size,
never on the worker count, and partial results are combined in chunk order.
That keeps every reduction bit-identical for 1, 4 or 8 threads.
"""

from concurrent.futures import ThreadPoolExecutor
import os

import numpy as np
from threadpoolctl import threadpool_limits

_STATE = {"threads": int(os.environ.get("YMB_THREADS", "1"))}
CHUNK = 8192


def set_threads(n):
    _STATE["threads"] = max(1, int(n))


def get_threads():
    return _STATE["threads"]


def chunk_slices(n, chunk=CHUNK):
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def chunk_map(fn, n, chunk=CHUNK):
    """Apply ``fn(slice)`` over fixed chunks of ``range(n)``; results in order.

    Only the outermost call fans out to threads and pins BLAS to one thread;
    nested calls (from inside a worker) run serially.
    """
    slices = chunk_slices(n, chunk)
    if _STATE.get("active"):
        return [fn(s) for s in slices]
    _STATE["active"] = True
    try:
        with threadpool_limits(limits=1):
            if get_threads() == 1 or len(slices) == 1:
                return [fn(s) for s in slices]
            with ThreadPoolExecutor(max_workers=get_threads()) as ex:
                return list(ex.map(fn, slices))
    finally:
        _STATE["active"] = False


def ordered_sum(parts):
    """Sum partial results in their given order."""
    total = None
    for p in parts:
        total = np.array(p, dtype=float, copy=True) if total is None else total + p
    return total
