from __future__ import annotations

from abc import abstractmethod
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class Runner:
    """Executes independent, index-addressed tasks (grid cells, Monte Carlo trials, pair fits)

    Results are always returned in the order of ``items`` regardless of how the work is scheduled.
    """

    @abstractmethod
    def map(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        ...

    def num_workers(self) -> int:
        return 1
