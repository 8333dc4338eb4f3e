"""Exception hierarchy shared across the package."""


class GrfError(Exception):
    """Base class for all package errors."""


class ContractViolation(GrfError, ValueError):
    """An argument broke a documented precondition (shape, range, ordering)."""


class ConfigurationError(GrfError, ValueError):
    """A sampler, study or tuning configuration is unusable."""


class OracleRefusal(GrfError):
    """The exact oracle declines a state space that is too large to enumerate."""


class ParseError(GrfError, ValueError):
    """Malformed lattice/graph input; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.lineno = lineno
        self.path = path


class DivergenceError(GrfError):
    """Stochastic approximation left the admissible region."""

    def __init__(self, message, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


class SingularMatrixError(GrfError, ArithmeticError):
    """A covariance / curvature matrix cannot be inverted."""


class NoCertificateError(GrfError):
    """Neither Dobrushin contraction nor one-step minorization certifies the kernel."""


class OutOfRegimeError(GrfError, ValueError):
    """A bound was requested outside the regime where it is valid."""


class BoundViolation(GrfError, AssertionError):
    """A computed TV distance exceeded its theoretical bound."""
