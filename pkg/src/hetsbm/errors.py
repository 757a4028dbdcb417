"""Exception types raised across the package."""


class HsbmError(Exception):
    """Base class for every error raised by hetsbm."""


class InfeasibleModel(HsbmError):
    """Requested degrees/pattern imply an edge probability above 1."""


class DimensionError(HsbmError):
    pass


class OutOfRange(HsbmError):
    pass


class AssumptionViolation(HsbmError):
    """A closed-form result was requested outside the regime it holds in."""


class DegeneratePattern(HsbmError):
    pass


class ConfigError(HsbmError):
    pass


class EmptyClass(HsbmError):
    pass


class ShapeError(HsbmError):
    pass


class ParseError(HsbmError):
    """Malformed bundle file. Carries the 1-based line and column."""

    def __init__(self, path, line, column, message):
        self.path = str(path)
        self.line = line
        self.column = column
        super().__init__(f"{self.path}:{line}:{column}: {message}")
