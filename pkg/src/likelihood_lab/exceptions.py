"""Exception types raised by likelihood_lab."""


class DomainError(ValueError):
    """A parameter or observation lies outside the family's domain."""


class SampleSpaceTooLarge(ValueError):
    """Exact enumeration was requested over more outcomes than the guard allows."""


class SingularMetricError(ValueError):
    """The Fisher-Rao metric is (numerically) singular or not positive definite."""


class GeodesicError(RuntimeError):
    """Geodesic integration or shooting failed.

    Attributes
    ----------
    residual : float
        Best endpoint residual reached before giving up (``nan`` if the failure
        happened before any endpoint was computed).
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
