"""Exception hierarchy shared across the package."""


class PovcastError(Exception):
    """Base class for all package errors."""


class ParseError(PovcastError):
    """A CSV cell could not be parsed; carries row/column context."""


class ShapeError(PovcastError):
    """Ragged or otherwise malformed matrix input."""


class EmptyError(PovcastError):
    """Input contained no data rows."""


class DomainError(PovcastError):
    """A numeric argument is outside its legal domain."""


class DegenerateError(PovcastError):
    """Too few observations for a well-defined update."""


class AllZeroWeightError(PovcastError):
    """Every grid cell of a discretized conditional has zero weight."""


class ConfigError(PovcastError):
    """Invalid run configuration."""
