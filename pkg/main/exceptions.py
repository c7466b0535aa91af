"""
Error types shared by every FMTC package.
Management commands turn these into CommandError; the run registry stores
their message on failed runs.
"""


class FmtcError(Exception):
    """Base class for all FMTC failures."""

    def with_context(self, prefix):
        """Return an error of the same type whose message starts with prefix."""
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone.args = (f"{prefix}: {self}",)
        return clone


class InvalidParameterError(FmtcError, ValueError):
    """A parameter is outside its documented range."""


class DimensionMismatchError(InvalidParameterError):
    """Array shapes do not agree."""


class IsolatedVertexError(FmtcError):
    """A graph vertex has zero degree."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"Vertex {index} has zero degree (isolated vertex)")


class DegenerateDataError(FmtcError):
    """Data carry no usable spread (e.g. every neighbour distance is zero)."""


class DegenerateProjectionError(FmtcError):
    """A matrix is too close to rank deficient to project onto the Stiefel manifold."""


class NumericalError(FmtcError):
    """A factorisation or solve failed."""


class ConsistencyError(FmtcError):
    """An internal numerical invariant was violated."""


class DataFormatError(FmtcError):
    """An input file could not be parsed."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        location = str(path) if path is not None else '<input>'
        if line is not None:
            location += f", line {line}"
        if column is not None:
            location += f", column {column}"
        super().__init__(f"{location}: {message}")


class ConfigError(FmtcError):
    """A run configuration failed schema validation."""
