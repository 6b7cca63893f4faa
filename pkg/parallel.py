import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def chunked(items: Sequence[T], size: int) -> List[Sequence[T]]:
    """Split a sequence into consecutive chunks of a fixed size"""
    if size < 1:
        raise ValueError(f"chunk size must be positive, got {size}")
    return [items[i:i + size] for i in range(0, len(items), size)]


def ordered_map(func: Callable[[T], R], chunks: Sequence[T], workers: int = 1) -> List[R]:
    """Apply func to every chunk, returning results in chunk order.

    Chunk boundaries are fixed by the caller, so reductions over the
    returned list do not depend on the worker count.
    """
    if workers <= 1 or len(chunks) <= 1:
        return [func(chunk) for chunk in chunks]
    workers = min(workers, len(chunks))
    logger.debug(f"Dispatching {len(chunks)} chunks to {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, chunks))
