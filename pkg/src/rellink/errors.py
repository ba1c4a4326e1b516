"""Exception types raised across the toolkit.

Every error derives from :class:`RelError` (itself a ``ValueError``) so callers
such as the CLI can separate input problems from internal failures.
"""


class RelError(ValueError):
    """Base class for all input/data errors."""


class DimensionMismatch(RelError):
    pass


class MalformedLine(RelError):
    def __init__(self, path, lineno: int, reason: str):
        self.path = str(path)
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"{self.path}:{lineno}: {reason}")


class DuplicateToken(RelError):
    def __init__(self, token: str, path=None):
        self.token = token
        where = f" in {path}" if path is not None else ""
        super().__init__(f"duplicate token {token!r}{where}")


class StoreFormatError(RelError):
    """The file is not a valid store or model file."""


class EmptyStore(RelError):
    pass


class SpanError(RelError):
    """Base for invalid externally supplied spans."""


class OutOfBounds(SpanError):
    def __init__(self, index: int, start: int, length: int, doc_length: int):
        self.index = index
        super().__init__(
            f"span {index} ({start}, {length}) lies outside the document "
            f"of length {doc_length}"
        )


class Overlap(SpanError):
    def __init__(self, first: int, second: int):
        self.indices = (first, second)
        super().__init__(f"spans {first} and {second} overlap")


class InvalidSpan(SpanError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"span {index}: {reason}")


class NonFiniteScores(RelError):
    pass


class DegenerateCalibration(RelError):
    pass


class DuplicatePrediction(RelError):
    pass


class SpanNotInGold(RelError):
    pass


class EmptyTrainingSet(RelError):
    pass
