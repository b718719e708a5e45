"""Exception hierarchy shared by all modules.

Anything derived from :class:`DomainError` is a precondition or input problem
and maps to exit status 1 in the CLI.
"""


class DomainError(ValueError):
    """An input violates an operation's precondition."""


class EmptyIntersectionError(DomainError):
    """A set clipped to a ball turned out empty."""


class ResolutionError(DomainError):
    """The grid is too coarse for the requested scale."""


class ResourceError(DomainError):
    """The requested object would be too large to build."""


class EmptyResultError(DomainError):
    """A level set extraction found no crossing cells."""


class TopologyError(DomainError):
    """A constructed curve is not simple."""


class NotAGraphError(DomainError):
    """A curve could not be written as a normal graph over another."""


class NumericalBlowupError(ArithmeticError):
    """A time stepper produced non-finite values."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class FlowExtinctError(RuntimeError):
    """The zero set of a level-set function disappeared."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class AvoidanceFailure(RuntimeError):
    """Two evolved barriers stopped being nested."""
