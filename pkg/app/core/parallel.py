"""
Row-partitioned execution for the heavy kernels.

Work is always cut into spans of `settings.ROW_BLOCK` output rows; the worker
count only decides how those spans are distributed, so results are the same
bit-for-bit for any number of workers.
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Tuple

from .config import settings

logger = logging.getLogger(__name__)

_pool: Optional[ThreadPoolExecutor] = None
_pool_lock = threading.Lock()
_local = threading.local()


def _get_pool() -> ThreadPoolExecutor:
    global _pool
    with _pool_lock:
        if _pool is None:
            _pool = ThreadPoolExecutor(
                max_workers=settings.worker_count,
                thread_name_prefix="llpack-rows",
            )
            logger.debug(f"Started row pool with {settings.worker_count} workers")
        return _pool


def current_workers() -> int:
    limit = getattr(_local, "limit", None)
    if limit is None:
        return settings.worker_count
    return max(1, min(limit, settings.worker_count))


@contextmanager
def worker_limit(workers: int) -> Iterator[int]:
    """Cap the workers used by kernels called from this thread."""
    previous = getattr(_local, "limit", None)
    _local.limit = workers
    try:
        yield current_workers()
    finally:
        _local.limit = previous


def row_spans(n_rows: int, block: Optional[int] = None) -> List[Tuple[int, int]]:
    block = block or settings.ROW_BLOCK
    return [(start, min(start + block, n_rows)) for start in range(0, n_rows, block)]


def run_row_blocks(fn: Callable[[int, int], None], n_rows: int) -> None:
    """Call fn(start, stop) for every row span, possibly on several threads."""
    spans = row_spans(n_rows)
    workers = min(current_workers(), len(spans))
    if workers <= 1:
        for start, stop in spans:
            fn(start, stop)
        return

    groups = [spans[i::workers] for i in range(workers)]

    def _run_group(group: List[Tuple[int, int]]) -> None:
        for start, stop in group:
            fn(start, stop)

    futures = [_get_pool().submit(_run_group, group) for group in groups]
    for future in futures:
        future.result()
