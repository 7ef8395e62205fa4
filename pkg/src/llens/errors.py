"""Exception hierarchy shared by every module."""


class LlensError(Exception):
    """Base class for all library errors."""


class BadReductionPrime(LlensError):
    pass


class OverflowLimit(LlensError):
    pass


class UnsupportedPrime(LlensError):
    pass


class DomainError(LlensError, ValueError):
    pass


class PoleError(LlensError):
    pass


class TooCloseToPole(PoleError):
    pass


class PrecisionUnachievable(LlensError):
    pass


class AdditiveFactorHasNoPoles(LlensError):
    pass


class UnhandledHigherOrderPole(LlensError):
    """Two poles of different local factors coincide away from -1/2."""


class CoefficientTableTooSmall(LlensError):
    pass


class HorizonCeilingExceeded(LlensError):
    """The series horizon for this conductor is beyond the configured ceiling."""

    def __init__(self, conductor: int, required: int, ceiling: int):
        self.conductor = conductor
        self.required = required
        self.ceiling = ceiling
        super().__init__(
            f"conductor {conductor} needs about {required} series terms, above the "
            f"ceiling of {ceiling}; this curve is beyond desk scale (raise the "
            f"horizon ceiling explicitly to attempt a long run)"
        )


class ZeroOnContour(LlensError):
    pass


class PhaseTrackingFailed(LlensError):
    pass


class ZeroCountMismatch(LlensError):
    pass


class SubdivisionFloorReached(LlensError):
    """A zero cluster could not be separated above the subdivision floor."""

    def __init__(self, center, size, count):
        self.center = center
        self.size = size
        self.count = count
        super().__init__(f"{count} zeros clustered within {size} of {center}")


class RankIndeterminate(LlensError):
    pass


class ZeroCoefficientScaling(LlensError):
    pass


class CurveFileError(LlensError):
    """A curve file or record failed validation."""


class SchemaMismatch(CurveFileError):
    """Upstream data no longer matches the expected layout."""


class NetworkError(LlensError):
    pass
