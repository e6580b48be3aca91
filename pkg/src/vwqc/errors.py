"""Exception hierarchy shared by the library and the command line."""


class VWQCError(Exception):
    """Base class for all errors raised by this package."""


class DataError(VWQCError, ValueError):
    """Input data violates a container invariant."""


class ParseError(DataError):
    """A CSV cell could not be read as a finite real number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyClassError(DataError):
    """A class index in ``0..K-1`` has no members."""


class DimensionError(VWQCError, ValueError):
    """Array shapes disagree with the fitted model or with each other."""


class ModelFormatError(VWQCError):
    """A model file is corrupt, truncated, of the wrong version, or invalid."""


class FoldError(VWQCError, ValueError):
    """The requested cross-validation split is infeasible."""
