"""Chunked work dispatch shared by both kernel backends.

Work over ``n`` items is split into fixed-size chunks; each chunk writes into
its own slot, so results are identical for any worker count, and the caller
reduces the slots afterwards in a fixed order. Worker threads only group
chunk execution; they never change chunk boundaries.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor

CHUNK = 2048

_lock = threading.Lock()
_executor: ThreadPoolExecutor | None = None
_executor_size = 0


def _shared_executor(workers: int) -> ThreadPoolExecutor:
    global _executor, _executor_size
    with _lock:
        if _executor is None or _executor_size < workers:
            _executor = ThreadPoolExecutor(max_workers=workers,
                                           thread_name_prefix="rmpnav-kern")
            _executor_size = workers
        return _executor


def chunk_spans(n: int, chunk: int = CHUNK) -> list[tuple[int, int, int]]:
    """(slot_index, start, stop) spans covering range(n)."""
    return [(i, s, min(s + chunk, n)) for i, s in enumerate(range(0, n, chunk))]


def run_chunks(fn, n: int, workers: int = 1, chunk: int = CHUNK) -> int:
    """Invoke ``fn(slot_index, start, stop)`` for every chunk of range(n).

    With ``workers > 1`` the chunks are dealt round-robin onto that many
    lanes and driven concurrently; outputs are unaffected because every
    chunk owns a disjoint slot. Returns the number of chunks.
    """
    spans = chunk_spans(n, chunk)
    if workers <= 1 or len(spans) <= 1:
        for idx, s, e in spans:
            fn(idx, s, e)
        return len(spans)
    lanes = [spans[k::min(workers, len(spans))] for k in range(min(workers, len(spans)))]

    def drive(lane):
        for idx, s, e in lane:
            fn(idx, s, e)

    ex = _shared_executor(len(lanes))
    futures = [ex.submit(drive, lane) for lane in lanes]
    for fut in futures:
        fut.result()
    return len(spans)


def pairwise_fold(stack):
    """Fixed-shape pairwise (tree) sum along axis 0 of an ndarray."""
    import numpy as np

    while stack.shape[0] > 1:
        n = stack.shape[0]
        half = n // 2
        folded = stack[: 2 * half : 2] + stack[1 : 2 * half : 2]
        if n % 2:
            folded = np.concatenate([folded, stack[-1:]], axis=0)
        stack = folded
    return stack[0]
