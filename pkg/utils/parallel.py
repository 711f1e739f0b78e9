"""
Ordered worker pool used for per-frame and per-chunk parallelism.

Work is always split into the same units regardless of the thread count and
results come back in submission order, so the combined output does not
depend on how many workers ran it.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, TypeVar

from utils.config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Execution:
    """
    Execution settings shared by the services.

    Attributes:
        threads: Worker count, 0 means hardware parallelism
        deterministic: Run every unit sequentially in index order
    """
    threads: int = 0
    deterministic: bool = False

    @classmethod
    def from_settings(cls) -> "Execution":
        settings = get_settings()
        return cls(threads=settings.threads, deterministic=settings.deterministic)

    @property
    def workers(self) -> int:
        if self.deterministic:
            return 1
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to every item, returning results in input order."""
        items = list(items)
        workers = min(self.workers, len(items))
        if workers <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))


SEQUENTIAL = Execution(threads=1, deterministic=True)


def chunk_slices(total: int, chunk: int) -> List[slice]:
    """Fixed-size index slices covering range(total)."""
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    return [slice(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def resolve(execution: Optional[Execution]) -> Execution:
    return execution if execution is not None else Execution.from_settings()
