"""
Error hierarchy shared by every module.

Each error carries the process exit code the command-line client returns
when it escapes a command.
"""

from typing import Any, Optional


class OcclusionError(Exception):
    """Base class for all pipeline errors"""
    exit_code: int = 3


class ConfigError(OcclusionError):
    """Invalid configuration, arguments or scene specification"""
    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(OcclusionError):
    """Dataset layout problems, undecodable inputs, empty or overlapping splits"""
    exit_code = 2


class ArtifactNotFoundError(DataError):
    """A prerequisite artifact of a previous command is missing"""

    def __init__(self, kind: str, path: Any):
        self.kind = kind
        self.path = str(path)
        super().__init__(f"{kind} not found: {path}")


class ModelFormatError(DataError):
    """Model file cannot be decoded"""


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    pass


class ShapeError(OcclusionError, ValueError):
    """
    Shape contract violation.

    Attributes:
        dimension: Name of the offending dimension
        expected: Expected extent (or description)
        actual: Extent actually received
    """
    exit_code = 3

    def __init__(self, dimension: str, expected: Any, actual: Any, op: Optional[str] = None):
        self.dimension = dimension
        self.expected = expected
        self.actual = actual
        self.op = op
        prefix = f"{op}: " if op else ""
        super().__init__(f"{prefix}{dimension} mismatch (expected {expected}, got {actual})")


class NumericError(OcclusionError):
    """Non-finite values produced by a computation"""
    exit_code = 3
