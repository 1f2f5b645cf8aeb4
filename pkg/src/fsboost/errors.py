"""Exception hierarchy shared by every module."""


class FsBoostError(Exception):
    """Base class for all library errors."""


class ShapeError(FsBoostError, ValueError):
    pass


class NonFiniteError(FsBoostError, FloatingPointError):
    pass


class DataError(FsBoostError):
    pass


class FormatError(FsBoostError):
    """Malformed binary file. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class EmptyMaskError(FsBoostError, ValueError):
    pass


class DegenerateMaskError(FsBoostError, ValueError):
    """Mask without foreground or without background. ``support_index`` is set for K-shot inputs."""

    def __init__(self, message, support_index=None):
        self.support_index = support_index
        if support_index is not None:
            message = f"{message} (support {support_index})"
        super().__init__(message)
