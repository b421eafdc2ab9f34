"""Exception hierarchy shared across the package.

Each family maps to one CLI exit code so stage failures are machine
distinguishable: config 2, parse 3, insufficient data 4, numeric/degenerate 5.
"""

from __future__ import annotations


class ActorCausalError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ActorCausalError):
    """Invalid or incomplete configuration."""

    exit_code = 2


class ParseError(ActorCausalError):
    """Malformed input that cannot be ingested."""

    exit_code = 3


class SchemaError(ParseError):
    """Input is readable but missing required columns or attributes."""


class EmptyLogError(ParseError):
    """Input contains no events."""


class InsufficientDataError(ActorCausalError):
    """Not enough observations for the requested computation."""

    exit_code = 4


class AlignmentError(InsufficientDataError):
    """Series date ranges do not overlap."""


class NumericError(ActorCausalError):
    """Numerically degenerate input (non-finite values, singular designs)."""

    exit_code = 5


class DegenerateSeriesError(NumericError):
    """A series is constant or otherwise unusable for inference."""


class SingularDesignError(NumericError):
    """Regression design matrix is rank deficient."""


class SelectionError(NumericError):
    """No lag group was ever active; the lambda grid needs adjustment."""
