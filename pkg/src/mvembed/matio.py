"""Delimited matrix files.

Format: first row holds column ids (leading corner cell ignored), first
column holds row ids, remaining cells are finite reals. Comma and tab
delimiters are accepted; the writer emits values at 17 significant digits
so written matrices round-trip bitwise.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import EmptyMatrixError, MatrixFormatError, MissingValueError

_MISSING_TOKENS = {"", "na", "nan", "n/a", "null"}


@dataclass
class RawMatrix:
    """A samples-by-predictors matrix with row and column identifiers."""

    values: np.ndarray
    row_ids: list[str] = field(default_factory=list)
    col_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise MatrixFormatError("matrix values must be two-dimensional")
        n, p = self.values.shape
        if not self.row_ids:
            self.row_ids = [f"r{i}" for i in range(n)]
        if not self.col_ids:
            self.col_ids = [f"c{j}" for j in range(p)]
        if len(self.row_ids) != n:
            raise MatrixFormatError(f"{len(self.row_ids)} row ids for {n} rows")
        if len(self.col_ids) != p:
            raise MatrixFormatError(f"{len(self.col_ids)} column ids for {p} columns")
        if len(set(self.row_ids)) != n:
            raise MatrixFormatError("duplicate row ids")
        if len(set(self.col_ids)) != p:
            raise MatrixFormatError("duplicate column ids")

    @property
    def shape(self):
        return self.values.shape


def check_finite(raw: RawMatrix) -> None:
    """Reject matrices with missing (non-finite) cells, naming the first one."""
    bad = ~np.isfinite(raw.values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MissingValueError(int(r) + 1, int(c) + 1, raw.row_ids[r], raw.col_ids[c])


def read_matrix(path) -> RawMatrix:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise EmptyMatrixError(f"{path}: need a header row and at least one data row")
    delim = "\t" if "\t" in lines[0] else ","
    col_ids = [t.strip() for t in lines[0].split(delim)][1:]
    if not col_ids:
        raise EmptyMatrixError(f"{path}: header names no columns")
    row_ids = []
    rows = []
    for r, line in enumerate(lines[1:], start=1):
        parts = line.split(delim)
        if len(parts) - 1 != len(col_ids):
            raise MatrixFormatError(
                f"{path}: row {r} has {len(parts) - 1} cells, expected {len(col_ids)}"
            )
        row_ids.append(parts[0].strip())
        vals = []
        for c, tok in enumerate(parts[1:], start=1):
            tok = tok.strip()
            if tok.lower() in _MISSING_TOKENS:
                raise MissingValueError(r, c, parts[0].strip(), col_ids[c - 1])
            try:
                v = float(tok)
            except ValueError as exc:
                raise MatrixFormatError(f"{path}: unparsable cell at ({r},{c}): {tok!r}") from exc
            if not math.isfinite(v):
                raise MissingValueError(r, c, parts[0].strip(), col_ids[c - 1])
            vals.append(v)
        rows.append(vals)
    return RawMatrix(np.asarray(rows, dtype=float), row_ids, col_ids)


def write_matrix(raw: RawMatrix, path, delimiter: str = "\t") -> None:
    out = [delimiter.join(["id"] + list(raw.col_ids))]
    for rid, row in zip(raw.row_ids, raw.values):
        out.append(delimiter.join([rid] + [f"{v:.17g}" for v in row]))
    Path(path).write_text("\n".join(out) + "\n")


def write_array(values: np.ndarray, path, row_ids=None, col_ids=None, delimiter="\t") -> None:
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    raw = RawMatrix(
        values,
        list(row_ids) if row_ids is not None else [f"r{i}" for i in range(n)],
        list(col_ids) if col_ids is not None else [f"c{j}" for j in range(p)],
    )
    write_matrix(raw, path, delimiter)
