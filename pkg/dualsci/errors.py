from __future__ import annotations


class ValidationError(ValueError):
    """Inputs violate a precondition (shapes, shifts, flags, files)."""


class UnsupportedError(ValidationError):
    """The requested mode exists but the selected component cannot provide it."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values."""
