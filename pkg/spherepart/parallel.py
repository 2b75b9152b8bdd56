"""
Ordered thread-pool mapping.

Results come back in input order whatever the thread count, so every
reduction over them is bit-identical between --threads 1 and --threads N.
numpy releases the GIL inside the heavy kernels, which is what the threads
overlap.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

T = TypeVar('T')
R = TypeVar('R')

# Module-wide default, set once by the CLI from --threads
_DEFAULT_THREADS = 1


def set_default_threads(threads: int) -> None:
    """Set the thread count used when callers pass threads=None."""
    global _DEFAULT_THREADS
    if threads < 1:
        raise ValueError(f"Thread count must be >= 1, got {threads}")
    _DEFAULT_THREADS = int(threads)


def get_default_threads() -> int:
    return _DEFAULT_THREADS


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: Optional[int] = None,
    desc: Optional[str] = None,
    disable_progress: bool = True,
) -> List[R]:
    """
    Apply fn to every item, in parallel when threads > 1, preserving order.

    Args:
        fn: Pure job function
        items: Job inputs
        threads: Worker count (None = module default)
        desc: Progress bar label
        disable_progress: Hide the progress bar

    Returns:
        List of results in the order of items
    """
    threads = _DEFAULT_THREADS if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        results = (fn(item) for item in items)
        return list(tqdm(results, total=len(items), desc=desc, disable=disable_progress))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=disable_progress))
