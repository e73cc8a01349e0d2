"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree with the declared architecture."""


class ConfigurationError(ValueError):
    """A configuration record is inconsistent or incomplete."""


class PreconditionError(ValueError):
    """A bound was evaluated outside the range where it holds."""

    def __init__(self, message, minimum=None):
        super().__init__(message)
        self.minimum = minimum


class DegenerateDistributionError(ValueError):
    """The sample has (numerically) zero spread."""


class ConsistencyError(ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


class SingularSystemError(ValueError):
    """A linear system or transform could not be inverted."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, message=None):
        super().__init__(message or f"training diverged at epoch {epoch}")
        self.epoch = epoch
