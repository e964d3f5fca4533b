from __future__ import annotations


class NvPolarError(Exception):
    pass


class DomainError(NvPolarError, ValueError):
    """Raised when a numerical operation is called outside of its domain"""

    pass


class InputValidationError(NvPolarError):
    """Raised for malformed sweep files, configs and command-line values

    Args:
        message: what is wrong with the input
        path: file the problem was found in, if any
        line: 1-based line number within ``path``, if known
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None) -> None:
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class ConvergenceError(NvPolarError):
    pass
