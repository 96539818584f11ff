"""Exception hierarchy shared by all subpackages."""


class GCSError(Exception):
    """Base class for errors raised by gcsgp."""


class DomainError(GCSError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidSpecError(DomainError):
    """A compound-symmetry specification is malformed (e.g. non-positive variance)."""


class InvalidParamsError(DomainError):
    """Generator parameters are not positive semidefinite."""


class CompositionError(GCSError, ValueError):
    """Kernel expressions cannot be combined (shared inputs, identifiability)."""


class NumericalError(GCSError, ArithmeticError):
    """A factorization failed even after nugget escalation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class FitError(GCSError, RuntimeError):
    """Every optimizer restart failed."""


class MetricError(GCSError, ValueError):
    """A metric is undefined for the given data."""
