"""Exception hierarchy shared by all modules."""


class StokesbenchError(Exception):
    """Base class. ``module`` and ``params`` locate the failing computation."""

    def __init__(self, message, *, module=None, params=None):
        super().__init__(message)
        self.module = module
        self.params = params

    def describe(self):
        head = f"[{self.module}]" if self.module else ""
        where = f" params={self.params}" if self.params is not None else ""
        return f"{head}{where} {self}".strip()


class UsageError(StokesbenchError, ValueError):
    """Invalid input (bad orders, mismatched truncations, malformed ranges)."""


class DomainError(StokesbenchError, ArithmeticError):
    """Operation undefined for the given value, e.g. inverting a singular matrix."""


class PrecisionError(StokesbenchError):
    """A numerical quantity could not be computed to the requested accuracy."""


class IntegrationError(PrecisionError):
    """The path integrator failed on a segment."""


class ConventionError(PrecisionError):
    """A computed Stokes matrix does not have the expected triangular shape."""
