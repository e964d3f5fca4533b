from __future__ import annotations

import dataclasses
import os
from typing import TYPE_CHECKING, ClassVar

from loguru import logger

if TYPE_CHECKING:
    from nvpolar.runners.runner import Runner


class _RunnerConfig:
    name = ClassVar[str]


@dataclasses.dataclass(frozen=True)
class _PyRunnerConfig(_RunnerConfig):
    name = "py"


@dataclasses.dataclass(frozen=True)
class _ParallelRunnerConfig(_RunnerConfig):
    name = "parallel"
    threads: int | None


def _get_runner_config_from_env() -> _RunnerConfig:
    """Retrieves the appropriate RunnerConfig from environment variables

    To use:

    1. PyRunner: set NVPOLAR_RUNNER=py
    2. ParallelRunner: set NVPOLAR_RUNNER=parallel and optionally NVPOLAR_THREADS=N
    """
    if "NVPOLAR_RUNNER" in os.environ:
        runner = os.environ["NVPOLAR_RUNNER"]
        if runner.upper() == "PY":
            return _PyRunnerConfig()
        elif runner.upper() == "PARALLEL":
            threads = os.getenv("NVPOLAR_THREADS")
            return _ParallelRunnerConfig(threads=int(threads) if threads else None)
        raise ValueError(f"Unsupported NVPOLAR_RUNNER variable: {os.environ['NVPOLAR_RUNNER']}")
    return _PyRunnerConfig()


# Global Runner singleton, initialized when accessed through the NvPolarContext
_RUNNER: Runner | None = None


@dataclasses.dataclass(frozen=True)
class NvPolarContext:
    """Global context for the current execution environment"""

    runner_config: _RunnerConfig = dataclasses.field(default_factory=_get_runner_config_from_env)
    disallow_set_runner: bool = False

    def runner(self) -> Runner:
        global _RUNNER
        if _RUNNER is not None:
            return _RUNNER
        if self.runner_config.name == "py":
            from nvpolar.runners.pyrunner import PyRunner

            logger.debug("Using PyRunner")
            _RUNNER = PyRunner()
        elif self.runner_config.name == "parallel":
            from nvpolar.runners.parallel_runner import ParallelRunner

            assert isinstance(self.runner_config, _ParallelRunnerConfig)
            logger.debug(f"Using ParallelRunner with threads={self.runner_config.threads}")
            _RUNNER = ParallelRunner(threads=self.runner_config.threads)
        else:
            raise NotImplementedError(f"Runner config implemented: {self.runner_config.name}")

        # Once a runner exists the config is frozen for the rest of the process
        global _NvPolarContext
        _NvPolarContext = dataclasses.replace(
            _NvPolarContext,
            disallow_set_runner=True,
        )

        return _RUNNER


_NvPolarContext = NvPolarContext()


def get_context() -> NvPolarContext:
    return _NvPolarContext


def set_runner_py() -> NvPolarContext:
    """Run grid cells and Monte Carlo trials serially in the current interpreter - this is the default behavior.

    Alternatively, users can set this behavior via an environment variable: NVPOLAR_RUNNER=py

    Returns:
        NvPolarContext: context after setting the Py runner
    """
    global _NvPolarContext
    if _NvPolarContext.disallow_set_runner:
        raise RuntimeError("Cannot set runner more than once")
    _NvPolarContext = dataclasses.replace(
        _NvPolarContext,
        runner_config=_PyRunnerConfig(),
        disallow_set_runner=True,
    )
    return _NvPolarContext


def set_runner_parallel(threads: int | None = None) -> NvPolarContext:
    """Run grid cells and Monte Carlo trials on a pool of worker processes

    Alternatively, users can set this behavior via environment variables:

    1. NVPOLAR_RUNNER=parallel
    2. Optionally, NVPOLAR_THREADS=N

    Args:
        threads: maximum number of workers. Defaults to None, which uses every available CPU.

    Returns:
        NvPolarContext: context after setting the parallel runner
    """
    global _NvPolarContext
    if _NvPolarContext.disallow_set_runner:
        raise RuntimeError("Cannot set runner more than once")
    _NvPolarContext = dataclasses.replace(
        _NvPolarContext,
        runner_config=_ParallelRunnerConfig(threads=threads),
        disallow_set_runner=True,
    )
    return _NvPolarContext
