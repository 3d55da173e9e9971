"""Exception hierarchy.

Everything raised because of bad input data derives from :class:`DataError`,
which the command line maps to exit code 2.
"""


class DataError(Exception):
    """Input data violates a schema or a table invariant."""


class MissingAuthor(DataError):
    """An observation has votes but no authorship record, or the author never voted on it."""


class UnknownSpecies(DataError):
    """A species token is absent from a closed species dictionary."""


class ParseError(DataError):
    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class RangeError(DataError):
    """A numeric field lies outside its admissible range."""


class DanglingReferenceError(DataError):
    """A file refers to an observation or user that the vote table does not contain."""


class EmptyExpertSet(DataError):
    pass


class EmptySubset(ValueError):
    pass


class InvalidAiWeight(ValueError):
    """AI weight outside the open interval that keeps the AI from self-validating."""


class WriteError(OSError):
    pass


class ConvergenceWarning(UserWarning):
    """Iterative aggregation hit ``max_iterations`` before reaching a fixed point."""
