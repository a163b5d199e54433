"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates an operation's contract."""


class ShapeError(ValueError):
    """Array dimensions do not line up."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but carries no usable content (e.g. all zeros)."""


class DataError(ValueError):
    """Input data contains non-finite or otherwise unusable values."""


class TensorFormatError(ValueError):
    """A tensor file failed validation; ``field`` names the offending header field."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class ChannelNotFoundError(LookupError):
    """A requested channel name is absent from a trial."""


class TrainingError(RuntimeError):
    """Training failed numerically (non-finite loss or gradient)."""
