"""Error types raised across the package.

Each class corresponds to one documented failure mode, so callers (and the
CLI) can surface the case by name.
"""


class ThermoshiftError(Exception):
    """Base class for all package errors."""


class ConfigError(ThermoshiftError):
    """Malformed system/config file; carries a line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# symbolic core
class NotAperiodic(ThermoshiftError):
    pass


class EmptyRowOrColumn(ThermoshiftError):
    pass


class RealizationOverlap(ThermoshiftError):
    pass


class NotAdmissible(ThermoshiftError):
    pass


class NoRealization(ThermoshiftError):
    pass


# thermo / operators
class DepthMismatch(ThermoshiftError):
    pass


class NoConvergence(ThermoshiftError):
    pass


class NonPositiveEigenvector(ThermoshiftError):
    """Signals a bug: impossible for aperiodic nonnegative matrices."""


class BracketFailure(ThermoshiftError):
    pass


# dolgopyat
class NoAdmissiblePair(ThermoshiftError):
    pass


class CapTooSmall(ThermoshiftError):
    pass


class DegenerateRoof(ThermoshiftError):
    pass


class OverlappingSupports(ThermoshiftError):
    pass


class DensenessFailure(ThermoshiftError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class FitFailure(ThermoshiftError):
    pass


# orbit census / correlations
class DomainError(ThermoshiftError):
    pass


class InsufficientSample(ThermoshiftError):
    pass


class BelowNoiseFloor(ThermoshiftError):
    pass


class TruncationBias(UserWarning):
    """Counting horizon too short for the requested lambda range."""


class DivergentRegion(UserWarning):
    """Zeta truncation evaluated where the tail bound is not summable."""
