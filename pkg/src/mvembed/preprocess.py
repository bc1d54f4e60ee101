"""Column standardization and cross-view sample alignment.

A view enters the solver with zero-mean columns, unit sample variance for
non-constant columns, and the whole matrix divided by n*p so the leading
eigenvalues of all views live on a comparable scale.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyIntersectionError, EmptyMatrixError
from .matio import RawMatrix, check_finite

logger = logging.getLogger(__name__)


@dataclass
class ColumnStats:
    """Fitted standardization transform: x -> (x - mean) * inv_sd * scale.

    ``inv_sd`` is zero for columns that were constant in the fitting data,
    mapping them (and any new data in them) to zero.
    """

    mean: np.ndarray
    inv_sd: np.ndarray
    scale: float

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values - self.mean) * self.inv_sd * self.scale


@dataclass
class StandardizedMatrix:
    x: np.ndarray
    row_ids: list[str]
    col_ids: list[str]
    stats: ColumnStats


@dataclass
class DataView:
    """One standardized modality with its regularization graph and sparseness."""

    x: np.ndarray
    graph: "RegularizationGraph"  # noqa: F821 - forward ref, see graph module
    sparseness: float
    name: str = ""
    row_ids: list[str] = field(default_factory=list)
    col_ids: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def standardize(raw: RawMatrix) -> StandardizedMatrix:
    """Center and scale columns, then divide the matrix by n*p.

    Sample standard deviation uses the n-1 denominator. Constant columns
    become all-zero columns rather than raising; they are inert downstream.
    """
    if raw.values.size == 0:
        raise EmptyMatrixError("cannot standardize an empty matrix")
    n, p = raw.values.shape
    if n < 2:
        raise EmptyMatrixError(f"need at least 2 rows, got {n}")
    check_finite(raw)
    mean = raw.values.mean(axis=0)
    sd = raw.values.std(axis=0, ddof=1)
    inv_sd = np.where(sd > 0.0, 1.0 / np.where(sd > 0.0, sd, 1.0), 0.0)
    stats = ColumnStats(mean=mean, inv_sd=inv_sd, scale=1.0 / (n * p))
    return StandardizedMatrix(stats.apply(raw.values), list(raw.row_ids), list(raw.col_ids), stats)


def align_views(views: list[RawMatrix]) -> list[RawMatrix]:
    """Restrict all views to their common samples, in the first view's order.

    Dropped sample counts are logged per view.
    """
    if not views:
        return []
    common = set(views[0].row_ids)
    for v in views[1:]:
        common &= set(v.row_ids)
    if not common:
        raise EmptyIntersectionError("views share no sample ids")
    order = [rid for rid in views[0].row_ids if rid in common]
    aligned = []
    for i, v in enumerate(views):
        dropped = len(v.row_ids) - len(order)
        if dropped:
            logger.info("view %d: dropping %d samples not shared by all views", i, dropped)
        index = {rid: r for r, rid in enumerate(v.row_ids)}
        sel = [index[rid] for rid in order]
        aligned.append(RawMatrix(v.values[sel], list(order), list(v.col_ids)))
    return aligned
