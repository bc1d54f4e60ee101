"""Exception types shared across the package."""


class MvembedError(Exception):
    """Base class for all package-specific errors."""


class EmptyMatrixError(MvembedError):
    pass


class MissingValueError(MvembedError):
    """A cell is missing or non-finite. Row/column indices are 1-based."""

    def __init__(self, row, col, row_id=None, col_id=None):
        self.row = row
        self.col = col
        self.row_id = row_id
        self.col_id = col_id
        loc = f"({row},{col})"
        if row_id is not None or col_id is not None:
            loc += f" [row={row_id!r}, col={col_id!r}]"
        super().__init__(f"missing or non-finite value at {loc}")


class MatrixFormatError(MvembedError):
    pass


class EmptyIntersectionError(MvembedError):
    pass


class KTooLargeError(MvembedError):
    pass


class RankDeficientError(MvembedError):
    pass


class ShapeMismatchError(MvembedError):
    pass


class DegenerateEmbeddingError(MvembedError):
    pass


class InvalidConfigError(MvembedError):
    pass


class InvalidSpecError(MvembedError):
    pass


class DegenerateSplitError(MvembedError):
    pass


class LengthMismatchError(MvembedError):
    pass
