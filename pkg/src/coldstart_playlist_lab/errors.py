from __future__ import annotations


class LabError(ValueError):
    pass


class ConfigError(LabError):
    pass


class DataError(LabError):
    pass


class SplitError(DataError):
    pass


class SchemaMismatchError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class NumericalError(LabError):
    pass


def at_line(path: str, line: int | None, message: str) -> str:
    """Prefix a message with `path:line` when the line is known."""
    if line is None:
        return f"{path}: {message}"
    return f"{path}:{line}: {message}"
