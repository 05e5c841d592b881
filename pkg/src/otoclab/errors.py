"""Exception types shared across the package."""


class OtocLabError(Exception):
    """Base class for all package errors."""


class CapacityError(OtocLabError, ValueError):
    """Hilbert-space dimension exceeds the configured cap."""


class UnsupportedOperatorError(OtocLabError, ValueError):
    """Operator cannot be represented or measured in the requested basis."""


class ContractViolation(OtocLabError, ValueError):
    """A precondition of an operation does not hold."""


class DegenerateOperatorError(OtocLabError, ZeroDivisionError):
    """An OTOC normalization vanishes."""


class DegenerateNormalizationError(OtocLabError, ArithmeticError):
    """A protocol denominator estimate is not strictly positive."""

    def __init__(self, message, raw_value=None):
        super().__init__(message)
        self.raw_value = raw_value


class IntegratorError(OtocLabError, RuntimeError):
    """Fixed-step integration failed to converge under step halving."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
