"""Exception and warning types raised across the package."""


class NmpmError(Exception):
    """Base class for package errors."""


class TruncationInsufficient(NmpmError):
    """Too much weight sits above the guard level of the Fock truncation."""


class NotHermitian(NmpmError):
    pass


class DimensionMismatch(NmpmError):
    pass


class QuadratureNotConverged(NmpmError):
    """Doubling the node density moved the result by more than the tolerance."""


class NonPositiveNormSquared(NmpmError):
    """The inverse squared normalization came out non-positive."""


class ValidityWarning(UserWarning):
    """The perturbative result is being used outside lambda*tau << 1."""
