"""Exception types shared across the package."""


class TailRobustError(Exception):
    """Base class for all package errors."""


class NonConvergence(TailRobustError):
    pass


class DivergentIntegral(TailRobustError):
    pass


class DomainError(TailRobustError, ValueError):
    pass


class TooFewTailSamples(TailRobustError):
    pass


class DegenerateTail(TailRobustError):
    pass


class PreconditionViolated(TailRobustError):
    pass


class InfeasibleBudget(TailRobustError):
    pass


class WorstCaseInfinite(TailRobustError):
    pass


class DimensionMismatch(TailRobustError, ValueError):
    pass


class SingularSystem(TailRobustError):
    pass


class PlanOverrun(TailRobustError):
    pass


class ParseError(TailRobustError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyData(TailRobustError):
    pass


class ConfigError(TailRobustError):
    pass
