"""Exception types shared across the package.

Two families matter to the command line: validation problems (bad input,
mismatched specs) and infeasibility (the math says no, or the request is
too large to enumerate).
"""


class CascadeLabError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CascadeLabError, ValueError):
    """Input is malformed or violates a documented precondition."""


class InfeasibleError(CascadeLabError):
    """The request is well formed but has no solution or is too large."""


class MonotonicityViolation(ValidationError):
    pass


class UnknownVertex(ValidationError, KeyError):
    pass


class ModeMismatch(ValidationError):
    pass


class WeightOutOfRange(ValidationError):
    pass


class SpecMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class AssumptionViolation(ValidationError):
    pass


class TooLarge(InfeasibleError):
    pass


class NoCrossing(InfeasibleError):
    pass


class NoAdmissibleParams(InfeasibleError):
    pass


class Unachievable(InfeasibleError):
    pass


class InfeasibleBetas(InfeasibleError):
    pass


class InfeasibleTarget(InfeasibleError):
    pass


class NoLambda0(InfeasibleError):
    pass
