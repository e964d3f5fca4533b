from __future__ import annotations

import sys


def setup_logger(level: str | None = None) -> None:
    from loguru import logger
    from loguru._defaults import env

    logger.remove()
    LOGURU_LEVEL = level if level is not None else env("LOGURU_LEVEL", str, "INFO")
    logger.add(sys.stderr, level=LOGURU_LEVEL)
