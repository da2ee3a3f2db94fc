"""
Exception types raised by the NapSelect package.
"""

from pathlib import Path
from typing import Optional, Union


class NapSelectError(Exception):
    """
    Base class for all errors raised by NapSelect.
    """


class DataFormatError(NapSelectError, ValueError):
    """
    Raised when an on-disk artifact or in-memory record violates its format.
    """

    def __init__(
        self,
        message: str,
        source: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
        field: Optional[int] = None,
    ):
        self.message = message
        self.source = source
        self.line = line
        self.field = field
        context = []
        if source is not None:
            context.append(str(source))
        if line is not None:
            context.append(f"line {line}")
        if field is not None:
            context.append(f"field {field}")
        prefix = ":".join(context)
        super().__init__(f"{prefix}: {message}" if prefix else message)

    def with_context(self, source: Optional[Union[str, Path]] = None, line: Optional[int] = None) -> 'DataFormatError':
        """Return a copy located at ``source``:``line``, keeping any field index."""
        return DataFormatError(
            self.message,
            source=source if source is not None else self.source,
            line=line if line is not None else self.line,
            field=self.field,
        )


class DimensionMismatchError(NapSelectError, ValueError):
    """
    Raised when patterns, vectors or weights of different dimensions are combined.
    """


class EmptyInputError(NapSelectError, ValueError):
    """
    Raised when an operation needs at least one element and got none.
    """


class ConfigurationError(NapSelectError, ValueError):
    """
    Raised for invalid parameters (non-positive rates, unsupported ratios, ...).
    """
