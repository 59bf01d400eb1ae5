"""Exception hierarchy shared across the package."""


class ShallowFlowError(Exception):
    """Base class for all package errors."""


class DimensionError(ShallowFlowError, ValueError):
    """Array shapes are incompatible."""


class DomainError(ShallowFlowError, ValueError):
    """A scalar argument lies outside its admissible range."""


class DegenerateTargetError(ShallowFlowError, ValueError):
    """The target sample has an all-zero frame, so projection is undefined."""


class DivergenceError(ShallowFlowError, FloatingPointError):
    """A loss or a vector-field evaluation became non-finite."""


class StiffnessError(ShallowFlowError, RuntimeError):
    """The adaptive step size underflowed."""


class ConfigError(ShallowFlowError, ValueError):
    """A configuration document is malformed."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class CheckpointError(ShallowFlowError, OSError):
    """A checkpoint is missing, truncated or inconsistent."""
