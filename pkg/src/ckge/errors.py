"""Exception types raised across the package."""


class CKGEError(Exception):
    """Base class for all package errors."""


class MalformedLine(CKGEError):
    def __init__(self, line, lineno=None, path=None):
        self.line = line
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(f"{where}expected 3 tab-separated fields, got {line!r}")


class MissingFile(CKGEError):
    pass


class DimensionMismatch(CKGEError):
    pass


class ShapeMismatch(CKGEError):
    pass


class InsufficientPoints(CKGEError):
    pass


class DegenerateInput(CKGEError):
    pass


class EmptyInput(CKGEError):
    pass


class EmptyReplaySet(CKGEError):
    pass


class EmptyTestSet(CKGEError):
    pass


class UnknownEntity(CKGEError):
    pass


class DegenerateDiagonal(CKGEError):
    pass


class ConfigError(CKGEError):
    pass


class SnapshotError(CKGEError):
    """Wraps a failure inside the pipeline with the snapshot index attached."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"snapshot {index}: {type(cause).__name__}: {cause}")
