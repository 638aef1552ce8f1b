"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A run, grid or link configuration cannot be used as given."""


class GridTooCoarseError(ConfigurationError):
    """The grid does not resolve the requested structure."""


class GridMismatchError(ValueError):
    """Fields defined on different grids were combined."""


class NonFiniteFieldError(ValueError):
    """A field contains NaN or infinite values."""


class CorruptSnapshotError(ValueError):
    """A snapshot file failed header, magic or length validation."""


class InvariantViolation(RuntimeError):
    """A physical or numerical invariant was broken during a run."""

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"{name}: {detail}" if detail else name)


class TimeStepTooLarge(ValueError):
    """The requested time step exceeds the stability limit of the state."""
