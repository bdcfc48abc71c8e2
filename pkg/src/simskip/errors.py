"""Exception types shared across the package."""


class SimSkipError(Exception):
    """Base class for all package-specific errors."""


class FormatError(SimSkipError, ValueError):
    """A file does not conform to its declared binary/text layout."""


class ValidationError(SimSkipError, ValueError):
    """An argument or data structure violates a documented contract."""


class ShapeError(SimSkipError, ValueError):
    """Array dimensions disagree with what an operation requires."""


class NumericsError(SimSkipError, ArithmeticError):
    """A computation produced or encountered non-finite / degenerate values."""
