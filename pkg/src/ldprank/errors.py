"""Exception hierarchy shared by the library and the command line."""


class LdpRankError(Exception):
    """Base class for all errors raised by ldprank."""


class DimensionError(LdpRankError, ValueError):
    """Two objects disagree on the number of alternatives (or agents)."""


class CapacityError(LdpRankError, ValueError):
    """Input too large for an exhaustive routine."""


class SingularMatrixError(LdpRankError, ValueError):
    """Transformation matrix has no inverse."""


class ProtocolError(LdpRankError, ValueError):
    """Answers do not match the query plan they claim to answer."""


class ParseError(LdpRankError, ValueError):
    """Malformed line in a ranking file."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(LdpRankError, ValueError):
    """Parsed data is not a set of complete strict orders."""


class FormatError(LdpRankError, ValueError):
    """Unknown or unsupported file format."""


class ConfigError(LdpRankError, ValueError):
    """Invalid experiment configuration."""


class DatasetError(LdpRankError, OSError):
    """Dataset could not be located or read."""
