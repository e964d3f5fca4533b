from __future__ import annotations

from typing import Callable, Sequence, TypeVar

import psutil
from joblib import Parallel, delayed
from loguru import logger

from nvpolar.runners.runner import Runner

T = TypeVar("T")
R = TypeVar("R")


class ParallelRunner(Runner):
    def __init__(self, threads: int | None = None) -> None:
        available = psutil.cpu_count(logical=True) or 1
        if threads is None:
            threads = available
        if threads < 1:
            raise ValueError(f"Requested {threads} workers, need at least 1")
        if threads > available:
            logger.warning(f"Requested {threads} workers but found only {available} CPUs, capping to {available}")
            threads = available
        self._threads = threads

    def num_workers(self) -> int:
        return self._threads

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        # NOTE: workers do not share the dipole quadrature caches, each process warms its own
        if self._threads == 1 or len(items) <= 1:
            return [func(item) for item in items]
        return list(Parallel(n_jobs=self._threads)(delayed(func)(item) for item in items))
