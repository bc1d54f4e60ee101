"""Sparse row-stochastic regularization graphs over predictors.

A graph smooths feature vectors during projection: row j mixes predictor j
with its neighbors, with non-negative weights summing to one. Neighbor
search is exact (brute force over all column pairs), which is feasible and
directly testable at the matrix sizes this package targets.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import KTooLargeError, MatrixFormatError

ROW_SUM_TOL = 1e-10


@dataclass
class RegularizationGraph:
    """Square sparse matrix with rows summing to one; diagonal always present."""

    dim: int
    matrix: sp.csr_matrix

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)
        if self.matrix.shape != (self.dim, self.dim):
            raise MatrixFormatError(f"graph matrix is {self.matrix.shape}, expected square dim {self.dim}")

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Smooth a length-p vector or p-by-k matrix."""
        return self.matrix @ v

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def is_identity(self) -> bool:
        m = self.matrix
        return m.nnz == self.dim and np.all(m.diagonal() == 1.0)


def identity_graph(p: int) -> RegularizationGraph:
    if p < 1:
        raise MatrixFormatError(f"graph dimension must be positive, got {p}")
    return RegularizationGraph(p, sp.identity(p, format="csr"))


def default_neighbor_count(p: int) -> int:
    """Default k for knn_graph: roughly 2.5% of the predictors, at least 1."""
    return max(1, min(p - 1, int(round(0.025 * p))))


def _column_correlations(x: np.ndarray) -> np.ndarray:
    # columns with zero variance get correlation 0 against everything
    x = np.asarray(x, dtype=float)
    xc = x - x.mean(axis=0)
    norms = np.sqrt((xc**2).sum(axis=0))
    safe = np.where(norms > 0.0, norms, 1.0)
    c = (xc / safe).T @ (xc / safe)
    c[norms == 0.0, :] = 0.0
    c[:, norms == 0.0] = 0.0
    return c


def knn_graph(x: np.ndarray, k: int, metric: str = "correlation") -> RegularizationGraph:
    """Uniform-weight graph over each predictor and its k nearest predictors.

    metric "correlation" ranks neighbors by absolute column correlation;
    "euclidean" by column-vector distance. Ties break toward the lower
    column index. Weights are uniform 1/(k+1) including the diagonal.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise MatrixFormatError("need at least 2 rows to build a knn graph")
    p = x.shape[1]
    if not 1 <= k < p:
        raise KTooLargeError(f"k={k} must satisfy 1 <= k < p={p}")
    if metric == "correlation":
        sim = np.abs(_column_correlations(x))
    elif metric == "euclidean":
        sq = (x**2).sum(axis=0)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x.T @ x), 0.0)
        sim = -d2
    else:
        raise MatrixFormatError(f"unknown metric {metric!r}")
    np.fill_diagonal(sim, -np.inf)

    w = 1.0 / (k + 1)
    indptr = np.arange(0, (p + 1) * (k + 1), k + 1)
    indices = np.empty(p * (k + 1), dtype=np.int64)
    for j in range(p):
        # stable sort on -sim breaks ties toward the lower column index
        neighbors = np.argsort(-sim[j], kind="stable")[:k]
        indices[j * (k + 1) : (j + 1) * (k + 1)] = np.sort(np.append(neighbors, j))
    data = np.full(p * (k + 1), w)
    return RegularizationGraph(p, sp.csr_matrix((data, indices, indptr), shape=(p, p)))


def correlation_threshold_graph(x: np.ndarray, tau: float) -> RegularizationGraph:
    """Connect each predictor to every column with |correlation| >= tau."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise MatrixFormatError("need at least 2 rows to build a correlation graph")
    if not 0.0 < tau <= 1.0:
        raise MatrixFormatError(f"tau={tau} must lie in (0, 1]")
    p = x.shape[1]
    mask = np.abs(_column_correlations(x)) >= tau
    np.fill_diagonal(mask, True)
    rows, cols = np.nonzero(mask)
    counts = mask.sum(axis=1)
    data = 1.0 / counts[rows]
    return RegularizationGraph(p, sp.csr_matrix((data, (rows, cols)), shape=(p, p)))


def save_graph(graph: RegularizationGraph, path) -> None:
    coo = graph.matrix.tocoo()
    lines = [f"dim={graph.dim}"]
    order = np.lexsort((coo.col, coo.row))
    for i in order:
        lines.append(f"{coo.row[i]}\t{coo.col[i]}\t{coo.data[i]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_graph(path) -> RegularizationGraph:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dim="):
        raise MatrixFormatError(f"{path}: expected a 'dim=<p>' header line")
    dim = int(lines[0].split("=", 1)[1])
    rows, cols, data = [], [], []
    for ln in lines[1:]:
        r, c, w = ln.split("\t")
        rows.append(int(r))
        cols.append(int(c))
        data.append(float(w))
    return RegularizationGraph(dim, sp.csr_matrix((data, (rows, cols)), shape=(dim, dim)))
