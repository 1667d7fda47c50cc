"""Exception types shared across the package.

The CLI maps these onto its stable exit-code contract:
input/parse problems -> 2, violated preconditions -> 3, numeric failures -> 4.
"""


class HvmlError(Exception):
    """Base class for all package errors."""


class DimensionError(HvmlError):
    """Array shapes or vector lengths do not match what an operation requires."""


class UndefinedMetricError(HvmlError):
    """A metric has no defined value for the given input (e.g. LRAP with no positive labels)."""


class ParseError(HvmlError):
    """A data file could not be parsed. Carries the offending path and line when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
            if line is not None:
                loc = f"{path}:{line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class ConfigError(HvmlError):
    """A run configuration or dataset precondition is violated."""


class GridError(HvmlError):
    """A results table does not cover the full methods-by-datasets grid."""


class NumericError(HvmlError):
    """A numeric routine failed beyond repair (non-finite input, factorization failure)."""
