"""Exception hierarchy shared by every stage of the pipeline."""


class SpikeSpectraError(Exception):
    """Base class; ``stage`` is filled in by the pipeline driver."""

    stage: str | None = None


class InvalidParams(SpikeSpectraError, ValueError):
    pass


class NonConvergence(SpikeSpectraError):
    pass


class QuadratureFailure(SpikeSpectraError):
    pass


class OutOfRange(SpikeSpectraError, ValueError):
    pass


class ConstraintViolation(SpikeSpectraError, ValueError):
    pass


class NoRoot(SpikeSpectraError):
    pass


class EmptyResult(SpikeSpectraError):
    pass


class IndexOutOfRange(SpikeSpectraError, IndexError):
    pass


class DimensionMismatch(SpikeSpectraError, ValueError):
    pass


class LayoutMismatch(SpikeSpectraError, ValueError):
    pass


class NotBlockCirculant(SpikeSpectraError, ValueError):
    pass


class DegenerateFrequency(SpikeSpectraError, ValueError):
    pass


class AmbiguousThreshold(SpikeSpectraError):
    pass
