"""Row-block parallelism with a barrier per time step."""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable
import logging

import numpy as np

from src.config import get_settings

logger = logging.getLogger(__name__)


def particle_blocks(n: int, workers: int) -> list[slice]:
    """Split range(n) into at most `workers` contiguous blocks."""
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


class BlockExecutor:
    """
    Runs a per-row kernel over contiguous particle blocks.

    Kernels must compute each row independently of the block it sits in; the
    concatenated result is then the same for any thread count.
    """

    def __init__(self, threads: int | None = None):
        self.threads = get_settings().threads if threads is None else threads
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self._pool: ThreadPoolExecutor | None = None

    def __enter__(self) -> "BlockExecutor":
        if self.threads > 1:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        return self

    def __exit__(self, *exc) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def map_rows(self, kernel: Callable[[slice], np.ndarray], n: int) -> np.ndarray:
        """Evaluate kernel on every block and stack the results along axis 0."""
        if self._pool is None:
            return kernel(slice(0, n))
        blocks = particle_blocks(n, self.threads)
        return np.concatenate(list(self._pool.map(kernel, blocks)), axis=0)
