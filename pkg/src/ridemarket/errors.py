"""Exception types shared across the package.

Every error raised by the library derives from MarketError so callers
(notably the command line front end) can distinguish validation failures
from programming errors.
"""
from __future__ import annotations


class MarketError(Exception):
    """Base class for all domain errors raised by this package."""


# --- network -----------------------------------------------------------------

class MissingFileError(MarketError):
    """An input file does not exist."""


class MalformedRowError(MarketError):
    """A row of an input file cannot be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DanglingEdgeError(MarketError):
    """An edge references a node that was never declared."""


class InvalidDimensionError(MarketError):
    """Grid construction called with non-positive dimensions or rates."""


class UnknownNodeError(MarketError):
    """A node id is not part of the network."""


class UnreachableError(MarketError):
    """No directed path exists between the queried nodes."""


# --- model -------------------------------------------------------------------

class NegativeInputError(MarketError):
    """A distance, duration or amount that must be non-negative was negative."""


# --- rtv ---------------------------------------------------------------------

class UnmappedEntityError(MarketError):
    """A request or vehicle has no platform mapping."""


# --- solve -------------------------------------------------------------------

class TooLargeError(MarketError):
    """Instance exceeds the brute-force oracle guard."""


class DimensionMismatchError(MarketError):
    """Linear program rows or bounds disagree with the variable count."""


# --- mechanisms --------------------------------------------------------------

class EmptyCoalitionError(MarketError):
    """The empty coalition has no characteristic value."""


class NonpositiveStandaloneError(MarketError):
    """Ratio-based allocation requires every singleton value to be positive."""


class ZeroDenominatorError(MarketError):
    """Weight construction would divide by a non-positive total."""


class ZeroWeightError(MarketError):
    """A player weight is zero or negative where a positive weight is required."""


class InvalidGammaError(MarketError):
    """The information price rate must lie in [0, 1]."""


# --- io / cli ----------------------------------------------------------------

class ScenarioParseError(MarketError):
    """Scenario or game file is not syntactically valid."""


class UnknownKeyError(MarketError):
    """Scenario file contains a key outside the schema."""


class ValidationError(MarketError):
    """Scenario contents are syntactically fine but semantically invalid."""


class OutputError(MarketError):
    """A result file could not be written."""
