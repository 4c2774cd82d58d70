"""Exception hierarchy.

Every error carries a ``code`` used by the CLI as its exit status:
1 for configuration problems, 2 for solver non-convergence and 3 for
violated preconditions.
"""


class PZError(Exception):
    code = 1


class ConfigurationError(PZError, ValueError):
    code = 1


class DomainError(PZError, ValueError):
    """Argument outside the domain of the operation."""

    code = 3


class RangeError(DomainError):
    """A mass or level outside the admissible range."""


class PreconditionError(PZError, ValueError):
    code = 3


class DegenerateError(PreconditionError):
    """Input makes the requested quotient 0/0 (flat level, constant function)."""


class InconsistencyError(PreconditionError):
    pass


class IntegrabilityError(PreconditionError):
    pass


class SolverError(PZError, RuntimeError):
    code = 2

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
