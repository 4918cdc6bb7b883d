"""Exception hierarchy shared across the toolkit."""


class MemesearchError(Exception):
    """Base class for all toolkit errors."""


class DataError(MemesearchError):
    """Malformed or inconsistent input data (files, vectors, labels)."""


class ParseError(DataError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class DimensionMismatchError(DataError):
    pass


class NonFiniteValueError(DataError):
    pass


class DuplicateIdError(DataError):
    pass


class EmptyClassError(DataError):
    pass


class ClassTooSmallError(DataError):
    pass


class InsufficientPairsError(DataError):
    pass


class AllTokensUnknownError(DataError):
    """Every token of a caption fell outside the word-vector vocabulary."""

    def __init__(self, tokens):
        super().__init__(f"no known tokens in query; dropped: {', '.join(tokens)}")
        self.tokens = list(tokens)


class NumericError(MemesearchError):
    """Non-finite values produced during training."""
