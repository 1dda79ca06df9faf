"""Exception types raised by the engine. Only cli.py turns them into exit codes."""

from typing import Optional


class BetweennessError(Exception):
    """Base class for every error raised by the backend."""


class GraphError(BetweennessError, ValueError):
    """Invalid graph operation (self-loop, vertex id out of bounds, malformed edge list)."""


class EventError(BetweennessError, ValueError):
    """An edge event that violates its precondition against the current graph."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StoreFormatError(BetweennessError):
    """Bad magic, unsupported version, inconsistent header or truncated SBC1 file."""


class SigmaOverflowError(BetweennessError):
    """A shortest-path count does not fit the store's σ cell width."""

    def __init__(self, source: int, vertex: int, value: int, width: int):
        self.source = source
        self.vertex = vertex
        super().__init__(
            f"σ overflow at source {source}, vertex {vertex}: "
            f"{value} does not fit in {width} bytes"
        )


class DistanceOverflowError(BetweennessError):
    """A distance above 254 cannot be stored in a 1-byte cell."""

    def __init__(self, source: int, vertex: int, value: int):
        self.source = source
        self.vertex = vertex
        super().__init__(
            f"distance {value} at source {source}, vertex {vertex} exceeds the 1-byte limit (254)"
        )


class SizeGuardError(BetweennessError):
    """Graph too large for an all-pairs oracle or a recompute-from-scratch baseline."""


class EngineError(BetweennessError, RuntimeError):
    """A worker failed; the event was rolled back on every partition."""
