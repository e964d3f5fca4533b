from __future__ import annotations

import os
import time
from contextlib import contextmanager
from typing import TYPE_CHECKING, Iterator

from loguru import logger

if TYPE_CHECKING:
    from viztracer import VizTracer

_ACTIVE_TRACE: str | None = None


def profiling_enabled() -> bool:
    return os.environ.get("NVPOLAR_PROFILING", "0") == "1"


@contextmanager
def profiler(filename: str) -> Iterator[VizTracer | None]:
    """Records a viztracer trace of the enclosed block into ``filename`` when NVPOLAR_PROFILING=1

    Traces do not nest: while one is recording, inner ``profiler`` blocks only log a warning.
    """
    global _ACTIVE_TRACE
    if not profiling_enabled():
        yield None
        return
    if _ACTIVE_TRACE is not None:
        logger.warning(f"profiler({filename}) not started, {_ACTIVE_TRACE} is still recording")
        yield None
        return

    from viztracer import VizTracer

    tracer = VizTracer(output_file=filename, tracer_entries=10_000_000, verbose=0)
    _ACTIVE_TRACE = filename
    try:
        with tracer:
            yield tracer
    finally:
        _ACTIVE_TRACE = None
    logger.info(f"Wrote viztracer trace to {filename}")


@contextmanager
def log_event(name: str) -> Iterator[None]:
    """Logs the wall time of the block at DEBUG, and marks it in the active trace if there is one"""
    logger.debug(f"log_event:enter:{name}")
    start = time.time()
    try:
        if _ACTIVE_TRACE is not None:
            from viztracer import get_tracer

            tracer = get_tracer()
            if tracer is not None:
                with tracer.log_event(name):
                    yield None
                return
        yield None
    finally:
        logger.debug(f"log_event:{name}:{(time.time() - start) * 1000:.3f}ms")
