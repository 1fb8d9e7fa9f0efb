class BreadthDepthError(Exception):
    """Base class for package errors."""


class ValidationError(BreadthDepthError, ValueError):
    """Input data violates a record or pool invariant."""


class ParameterError(BreadthDepthError, ValueError):
    """An argument is outside its allowed range."""
