"""Exception hierarchy shared across the package."""


class StochEtdError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(StochEtdError, ValueError):
    pass


class NonFinite(StochEtdError, FloatingPointError):
    """A field evaluation or stage produced NaN/Inf.

    ``stage`` is the 1-based stage index when raised from inside a scheme.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class BlowUp(StochEtdError):
    """A trajectory went non-finite at ``step`` (0-based step index)."""

    def __init__(self, step, stage=None):
        super().__init__(f"trajectory blew up at step {step}")
        self.step = step
        self.stage = stage


class InvalidConfig(StochEtdError, ValueError):
    pass


class ConfigError(InvalidConfig):
    pass


class InvalidFactor(StochEtdError, ValueError):
    pass


class IndexOutOfRange(StochEtdError, IndexError):
    pass


class MissingLinearPart(StochEtdError, ValueError):
    pass


class CoefficientMismatch(StochEtdError, ValueError):
    pass


class InsufficientData(StochEtdError, ValueError):
    pass


class DegenerateDirection(StochEtdError, ValueError):
    pass
