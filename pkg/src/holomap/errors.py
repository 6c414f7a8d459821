"""Exception hierarchy shared by all holomap modules."""


class HolomapError(Exception):
    """Base class for library errors."""


class DomainError(HolomapError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class RangeError(HolomapError, ValueError):
    """A value lies outside the image of a branch."""


class StructureError(HolomapError, ValueError):
    """Inputs do not have the shape an operation requires
    (partition mismatch, non-Markov branch, grid mismatch, ...)."""


class PreconditionError(HolomapError, ValueError):
    """A mathematical precondition of a construction is violated."""


class NumericError(HolomapError, ArithmeticError):
    """A numerical safeguard tripped (flat derivative, escape from [0, 1])."""


class ConvergenceError(HolomapError, RuntimeError):
    """An iterative procedure failed to converge."""


class SizeError(HolomapError, ValueError):
    """A combinatorial size guard was exceeded."""
