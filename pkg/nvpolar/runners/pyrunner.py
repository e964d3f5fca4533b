from __future__ import annotations

from typing import Callable, Sequence, TypeVar

from nvpolar.runners.runner import Runner

T = TypeVar("T")
R = TypeVar("R")


class PyRunner(Runner):
    def map(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        return [func(item) for item in items]
