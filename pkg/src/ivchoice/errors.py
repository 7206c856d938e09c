"""Exception hierarchy.

Every exception exposes ``name`` (the class name), which the CLI prints on
stderr so that failures are machine readable.
"""


class IVChoiceError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class InvalidConfig(IVChoiceError, ValueError):
    """A configuration or domain value violates its invariants."""


class MissingNonidentifiedMean(IVChoiceError, ValueError):
    """An operation needs mu_a0 / mu_n1 but the slot is absent."""


class OutOfRange(IVChoiceError, ValueError):
    """A prior mean or rectangle lies outside the outcome range."""


class TooLarge(IVChoiceError, ValueError):
    """Input exceeds the limits of the brute-force grid oracle."""


class EstimationError(IVChoiceError):
    """Base for failures raised while estimating from data."""


class RankDeficient(EstimationError):
    pass


class WeakInstrument(EstimationError):
    pass


class EmptyArm(EstimationError):
    pass


class EmptyCell(EstimationError):
    pass


class MonotonicityViolation(EstimationError):
    pass


class NonBinaryOutcome(EstimationError):
    pass
