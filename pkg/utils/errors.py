"""Exception hierarchy shared by every package."""


class UQError(Exception):
    """Base class for all errors raised by the toolkit."""


class InvalidInputError(UQError, ValueError):
    """An operation received arguments that violate its preconditions."""


class IdxFormatError(InvalidInputError):
    """IDX container with an unexpected magic number."""

    def __init__(self, expected: int, found: int):
        self.expected = expected
        self.found = found
        super().__init__(
            f"Bad IDX magic: expected 0x{expected:08x}, found 0x{found:08x}"
        )


class IdxLengthError(InvalidInputError):
    """IDX container whose payload is shorter than its header announces."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Truncated IDX payload: expected {expected} bytes, got {actual}"
        )


class ConfigurationError(UQError, ValueError):
    """Invalid experiment configuration or model architecture."""

    def __init__(self, message: str, field: str = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ArtifactError(UQError, OSError):
    """Output tree problems: collisions, missing stage inputs."""


class DataFileError(UQError, OSError):
    """Input data file whose contents are well-formed but unusable."""


class InvariantViolation(UQError):
    """An internal consistency check failed."""
