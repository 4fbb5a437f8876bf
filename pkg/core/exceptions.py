"""
Exception hierarchy shared by every Gridwalk app.

Each class maps one error kind of the simulator:
  - InvalidParameterError: a caller passed a value outside an operation's domain
  - InvalidStateError: an operation was called on a value in the wrong state
  - ProtocolViolationError: the simulator broke one of its own invariants (a bug guard)

The builtin bases are kept so callers catching ValueError / RuntimeError still work.
"""


class GridwalkError(Exception):
    """Base class for all simulator errors."""


class InvalidParameterError(GridwalkError, ValueError):
    """Raised when an argument is outside the accepted domain."""


class InvalidStateError(GridwalkError, RuntimeError):
    """Raised when an operation does not apply to the current state."""


class ProtocolViolationError(InvalidStateError):
    """Raised when a protocol invariant is broken by the simulator itself."""
