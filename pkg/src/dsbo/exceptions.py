"""Exception hierarchy shared by every module of the package."""


class DsboError(Exception):
    """Base class for all errors raised by dsbo."""


class DimensionMismatch(DsboError, ValueError):
    pass


class DisconnectedGraph(DsboError, ValueError):
    pass


class DuplicateEdge(DsboError, ValueError):
    pass


class SelfLoop(DsboError, ValueError):
    pass


class NotDoublyStochastic(DsboError, ValueError):
    pass


class CapabilityMissing(DsboError, NotImplementedError):
    """The problem does not provide the requested closed-form quantity."""


class BadMagic(DsboError, ValueError):
    pass


class CountMismatch(DsboError, ValueError):
    pass


class TruncatedFile(DsboError, ValueError):
    pass


class IndexOutOfRange(DsboError, IndexError):
    pass


class BadBatchSize(DsboError, ValueError):
    pass


class NonPositiveStep(DsboError, ValueError):
    pass


class BadRho(DsboError, ValueError):
    pass


class DivergenceDetected(DsboError, FloatingPointError):
    """An iterate became NaN or infinite.

    ``step`` holds the first outer iteration at which it was observed.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite iterate detected at outer step {step}")


class TrackingInvariantViolated(DsboError, AssertionError):
    pass


class LowerSolveFailed(DsboError, RuntimeError):
    pass


class SingularHessian(DsboError, ValueError):
    pass


class MismatchedCadence(DsboError, ValueError):
    pass


class ConfigError(DsboError, ValueError):
    pass
