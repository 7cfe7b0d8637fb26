"""Exception types shared across the package."""


class MellinBVError(Exception):
    """Base class for library errors."""


class NonFiniteIntegrand(MellinBVError, ValueError):
    """An integrand returned NaN or inf at a quadrature node.

    For operator evaluation this means the function is outside the operator
    domain for the given kernel and point.
    """


class UnknownDimension(MellinBVError, ValueError):
    pass


class InsufficientData(MellinBVError, ValueError):
    pass


class TooManyPoints(MellinBVError, ValueError):
    pass


class PreconditionNotCertified(MellinBVError):
    pass


class IncompleteTable(MellinBVError):
    pass


class ConfigError(MellinBVError, ValueError):
    pass


class SuspectedDivergence(RuntimeWarning):
    """Doubling the truncation box changed an integral by more than 1%."""
