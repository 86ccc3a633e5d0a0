"""Exception types raised by the validation pipeline."""


class ValidationError(Exception):
    """Base class of every error raised by hetproof."""


class ShapeMismatch(ValidationError, ValueError):
    pass


class DivisionByIntervalContainingZero(ValidationError, ZeroDivisionError):
    pass


class NegativeSqrtDomain(ValidationError, ValueError):
    pass


class EmptyIntersection(ValidationError):
    pass


class SingularEnclosure(ValidationError):
    """Invertibility of an interval matrix could not be verified."""


class ComplexFixedPoints(ValidationError):
    pass


class EigenvalueVerificationFailed(ValidationError):
    pass


class SingularHomologicalMatrix(ValidationError):
    pass


class HyperbolicityMarginTooSmall(ValidationError):
    pass


class OrderTooLow(ValidationError):
    pass


class WindowEmpty(ValidationError):
    def __init__(self, msg, c1=None, c2=None):
        super().__init__(msg)
        self.c1 = c1
        self.c2 = c2


class OutsideShrunkDomain(ValidationError):
    pass


class InclusionFailed(ValidationError):
    def __init__(self, msg, image=None, Y=None):
        super().__init__(msg)
        self.image = image
        self.Y = Y


class InflationDiverged(ValidationError):
    pass


class DegenerateSegment(ValidationError):
    pass


class ClosureFailed(ValidationError):
    pass


class BrokenChain(ValidationError):
    pass


class NoSeedFound(ValidationError):
    pass


class ContinuationStalled(ValidationError):
    pass
