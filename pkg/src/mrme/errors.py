"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when user-supplied data or options fail validation."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine cannot deliver a trustworthy result
    (series cap exceeded, singular information matrix, and the like)."""
