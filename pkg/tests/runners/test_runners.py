from __future__ import annotations

import pytest

from nvpolar.context import _get_runner_config_from_env, get_context
from nvpolar.runners.parallel_runner import ParallelRunner
from nvpolar.runners.profiler import log_event, profiler, profiling_enabled
from nvpolar.runners.pyrunner import PyRunner


def _square(x: int) -> int:
    return x * x


def test_pyrunner_keeps_order() -> None:
    assert PyRunner().map(_square, [3, 1, 2]) == [9, 1, 4]
    assert PyRunner().num_workers() == 1


def test_parallel_runner_keeps_order() -> None:
    runner = ParallelRunner(threads=2)
    assert runner.map(_square, list(range(10))) == [x * x for x in range(10)]
    assert runner.map(_square, []) == []


def test_parallel_runner_caps_threads() -> None:
    assert ParallelRunner(threads=10_000).num_workers() < 10_000
    assert ParallelRunner().num_workers() >= 1
    with pytest.raises(ValueError):
        ParallelRunner(threads=0)


def test_runner_config_from_env(monkeypatch) -> None:
    monkeypatch.delenv("NVPOLAR_RUNNER", raising=False)
    assert _get_runner_config_from_env().name == "py"

    monkeypatch.setenv("NVPOLAR_RUNNER", "parallel")
    monkeypatch.setenv("NVPOLAR_THREADS", "3")
    config = _get_runner_config_from_env()
    assert config.name == "parallel"
    assert config.threads == 3

    monkeypatch.setenv("NVPOLAR_RUNNER", "ray")
    with pytest.raises(ValueError):
        _get_runner_config_from_env()


def test_context_runner_is_a_singleton() -> None:
    assert get_context().runner() is get_context().runner()


def test_profiler_is_inactive_by_default(monkeypatch) -> None:
    monkeypatch.delenv("NVPOLAR_PROFILING", raising=False)
    assert not profiling_enabled()
    with profiler("unused.json") as tracer:
        assert tracer is None


def test_log_event_times_the_block() -> None:
    from loguru import logger

    messages: list[str] = []
    handler_id = logger.add(lambda message: messages.append(message.record["message"]), level="DEBUG")
    try:
        with log_event("block"):
            pass
    finally:
        logger.remove(handler_id)
    assert messages[0] == "log_event:enter:block"
    assert messages[-1].startswith("log_event:block:") and messages[-1].endswith("ms")


def test_profiling_flag(monkeypatch) -> None:
    monkeypatch.setenv("NVPOLAR_PROFILING", "1")
    assert profiling_enabled()
    monkeypatch.setenv("NVPOLAR_PROFILING", "0")
    assert not profiling_enabled()
