"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TypedMemError(Exception):
    """Base class for every error raised by typedmem."""


class ValidationError(TypedMemError, ValueError):
    """A value object was constructed with data violating its invariants."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ParseError(TypedMemError):
    """Malformed model output, dataset file, or interchange line."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.line = line
        self.path = path


class TemporalError(TypedMemError):
    """A temporal phrase could not be resolved against its reference date."""


class ProviderError(TypedMemError):
    """A remote or scripted model provider failed to return a usable response."""

    def __init__(self, message: str, *, elapsed_s: float | None = None):
        super().__init__(message)
        self.elapsed_s = elapsed_s


class DimensionError(TypedMemError):
    """Embedding dimensions disagree."""


class StoreError(TypedMemError):
    """Persistent store failure (I/O or integrity)."""


class SchemaMismatch(StoreError):
    """An existing store file was opened with incompatible parameters."""


class DuplicateId(StoreError):
    """A record id already exists in the store."""


class EmptyInput(TypedMemError, ValueError):
    """An aggregate was requested over an empty sample."""


class UnknownCategory(TypedMemError):
    """A dataset category code has no mapping."""


class BenchmarkError(TypedMemError):
    """A benchmark run exceeded its tolerated item failure rate."""
