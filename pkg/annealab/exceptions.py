"""
Errors shared by every app of the laboratory.
"""


class AnnealabError(Exception):
    """Base class for laboratory errors."""


class InvalidInputError(AnnealabError, ValueError):
    """Argument outside the operation's precondition."""


class DomainExceededError(AnnealabError):
    """Requested points fall outside the landscape's domain box."""


class ResourceError(AnnealabError):
    """Allocation would exceed a configured budget."""


class DegenerateInputError(AnnealabError):
    """Input has no usable structure (e.g. a field without minima)."""


class UnsupportedError(AnnealabError):
    """Operation is not available for this dimension or kind of input."""


class InsufficientDataError(AnnealabError):
    """Too few usable rows for a fit."""


class DivergenceError(AnnealabError):
    """A chain left every reasonable region (non-finite or huge iterate)."""

    def __init__(self, k, x, message=None):
        self.k = k
        self.x = x
        super().__init__(message or f"chain diverged at iteration {k}: x={x!r}")
