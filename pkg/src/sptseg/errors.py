"""Exception types shared across the library."""


class SptSegError(Exception):
    """Base class for all library errors."""


class DimensionError(SptSegError):
    """Shapes do not satisfy an operation's preconditions."""


class ContractError(SptSegError):
    """An API contract was violated (bad argument, bad state)."""


class NonFiniteError(SptSegError):
    """A NaN or Inf appeared where only finite values are allowed."""


class ConfigError(SptSegError):
    """Invalid or unknown configuration content."""


class CheckpointError(SptSegError):
    """Checkpoint file is corrupt, truncated, or incompatible."""


class TrainingDiverged(SptSegError):
    """The training loss became non-finite."""

    def __init__(self, step, term, value):
        self.step = step
        self.term = term
        self.value = value
        super().__init__(f"non-finite loss at step {step}: {term}={value}")
