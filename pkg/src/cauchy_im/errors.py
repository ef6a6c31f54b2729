"""Exception hierarchy shared by all modules."""


class CauchyIMError(Exception):
    """Base class for package errors."""


class DomainError(CauchyIMError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateDataError(DomainError):
    """Data hit a probability-zero configuration (e.g. a tie at the minimum)."""


class CapabilityError(CauchyIMError, NotImplementedError):
    """The requested combination of assertion and random set is unsupported."""


class EmptyIntervalError(CauchyIMError):
    """No parameter value reaches the requested plausibility threshold."""


class AccuracyError(CauchyIMError, ArithmeticError):
    """Quadrature did not reach the requested tolerance.

    Carries the best estimate and its error bound.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class OptimizationError(CauchyIMError, RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
