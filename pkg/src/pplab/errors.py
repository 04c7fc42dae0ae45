"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array argument does not have the shape an operation requires."""


class ConfigError(ValueError):
    """An invalid configuration value (bad dims, ranges, unknown keys)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge to its requested tolerance."""


class TrainingDiverged(RuntimeError):
    """A training loop produced a non-finite loss or gradient.

    Carries the step index at which divergence was detected.
    """

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


class DegenerateDataError(ValueError):
    """A statistic is undefined for the given data (e.g. constant input)."""
