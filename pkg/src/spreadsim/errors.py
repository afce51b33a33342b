"""Exception types shared across the package.

Each error class maps to one CLI exit code (see cli.EXIT_CODES).
"""


class SpreadsimError(Exception):
    """Base class for all package errors."""


class ConfigError(SpreadsimError):
    """Invalid configuration document. Carries a dotted field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidInputError(SpreadsimError):
    """Operation precondition violated (bad quantiles, negative values, ...)."""


class CapacityError(SpreadsimError):
    """Reservoir cannot hold the requested particle count."""


class DegenerateGeometryError(SpreadsimError):
    """Coincident centers or otherwise unresolvable contact geometry."""


class PhaseTimeoutError(SpreadsimError):
    """A simulation phase exceeded its step budget. Carries partial state."""

    def __init__(self, message, state=None):
        self.state = state
        super().__init__(message)


class NumericalFaultError(SpreadsimError):
    """NaN/Inf detected in state arrays, or other numerical breakdown."""


class InconsistentStateError(SpreadsimError):
    """Metric evaluation encountered a contradictory snapshot."""


class SnapshotFormatError(SpreadsimError):
    """Snapshot file is corrupt, truncated, or has an unsupported version."""
