"""Exception and warning types."""


class GraventError(Exception):
    """Base class for all package errors."""


class InvalidCovarianceError(GraventError, ValueError):
    """Covariance matrix is malformed, asymmetric or unphysical."""


class NumericalDomainError(GraventError, ArithmeticError):
    """A closed-form expression was evaluated outside its numerical domain."""


class PropagationOverflowError(GraventError, OverflowError):
    """Time evolution produced non-finite values (unstable mode at large t)."""


class IntegrationError(GraventError, ArithmeticError):
    """Adaptive integration failed, e.g. the step size underflowed."""


class CollisionError(GraventError, ValueError):
    """Requested time lies beyond the instant the masses touch."""


class ConfigError(GraventError, ValueError):
    """Invalid scenario or sweep configuration.

    Args:
        message: human-readable description.
        line: 1-based line number in the source document, if known.
        key: offending key, if any.
    """

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class RegimeWarning(UserWarning):
    """A closed-form result was evaluated outside its approximation regime."""
