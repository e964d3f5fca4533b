from __future__ import annotations

from typing import IO

import fsspec
from fsspec import AbstractFileSystem, get_filesystem_class
from loguru import logger


def get_filesystem(protocol: str, **kwargs) -> AbstractFileSystem:
    klass = get_filesystem_class(protocol)
    fs = klass(**kwargs)
    return fs


def get_protocol_from_path(path: str, **kwargs) -> str:
    split = path.split("://")
    assert len(split) <= 2, f"too many protocol separators found in {path}"
    protocol = split[0] if len(split) == 2 else "file"
    return protocol


def get_filesystem_from_path(path: str, **kwargs) -> AbstractFileSystem:
    protocol = get_protocol_from_path(path)
    try:
        fs = get_filesystem(protocol, **kwargs)
    except ImportError:
        logger.error(f"Error when importing dependencies for accessing data with: {protocol}")
        raise
    return fs


def exists(path: str) -> bool:
    return get_filesystem_from_path(path).exists(path)


def read_text(path: str) -> str:
    if not exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    with fsspec.open(path, "r", encoding="utf-8") as f:
        return f.read()


def open_for_write(path: str) -> IO[str]:
    """Opens ``path`` for text writing, creating parent directories on the local filesystem"""
    kwargs = {"auto_mkdir": True} if get_protocol_from_path(path) == "file" else {}
    return fsspec.open(path, "w", encoding="utf-8", newline="", **kwargs).open()


def write_text(path: str, text: str) -> None:
    with open_for_write(path) as f:
        f.write(text)
