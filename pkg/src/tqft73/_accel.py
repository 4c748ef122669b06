"""Optional numba acceleration.

Set ``TQFT_NUMBA=0`` to force the pure-numpy code paths.  The flag is read once
at import time; ``use_numba()`` reports what was selected.
"""
from __future__ import annotations

import os

_WANT = os.environ.get("TQFT_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT:
        raise ImportError("numba disabled by TQFT_NUMBA")
    from numba import njit, prange  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        # bare @njit or @njit(...) both become identity decorators
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def use_numba() -> bool:
    return HAVE_NUMBA


def thread_count(override: int | None = None) -> int:
    """Worker threads for chunked kernels: explicit value, else TQFT_THREADS, else CPU count."""
    if override is not None:
        return max(1, int(override))
    env = os.environ.get("TQFT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"TQFT_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def chunked_map(fn, n: int, workers: int, min_chunk: int = 256):
    """Apply ``fn(lo, hi)`` over fixed chunks of range(n); results in chunk order."""
    size = max(min_chunk, -(-n // max(1, workers)))
    bounds = [(lo, min(n, lo + size)) for lo in range(0, n, size)]
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda p: fn(*p), bounds))
