"""Exception types raised across the package."""


class FptConflictError(Exception):
    """Base class for all package errors."""


class DegenerateSegment(FptConflictError, ValueError):
    pass


class AmbiguousSide(FptConflictError, ValueError):
    pass


class InvalidArc(FptConflictError, ValueError):
    pass


class NonPsdCovariance(FptConflictError, ArithmeticError):
    pass


class UnstableModel(FptConflictError, ArithmeticError):
    pass


class OutOfHorizon(FptConflictError, ValueError):
    pass


class NotApproaching(FptConflictError, ValueError):
    """The reduced 1-D process never moves toward its boundary."""


class DegenerateVariance(FptConflictError, ArithmeticError):
    pass


class MethodCollapse(FptConflictError, ArithmeticError):
    """Zero drift and zero variance growth: the first-passage density vanishes identically."""


class NegativeDensity(FptConflictError, ArithmeticError):
    pass


class OutOfValidityDomain(FptConflictError, ValueError):
    pass


class UnsupportedRegion(FptConflictError, TypeError):
    pass


class ConfigError(FptConflictError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MethodError(FptConflictError, RuntimeError):
    def __init__(self, method, cause):
        self.method = method
        self.cause = cause
        super().__init__(f"method '{method}' failed: {cause}")
