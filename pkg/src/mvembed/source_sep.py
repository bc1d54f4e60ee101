"""Low-rank basis extraction from column-bound embeddings.

The cross-view basis is the n-by-k summary a view is reconstructed from.
Two routes: the leading left-singular vectors (orthogonal basis), or the
independent component scores of a symmetric fixed-point ICA (statistically
independent basis). Both carry a deterministic column-sign convention so
equal inputs give bitwise-equal outputs.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import substream
from .exceptions import RankDeficientError, ShapeMismatchError

ICA_MAX_ITER = 200
ICA_TOL = 1e-6
RANK_REL_TOL = 1e-12


class IcaConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class BasisMatrix:
    u_tilde: np.ndarray  # n x k
    method: str  # "svd" | "ica"
    converged: bool = True

    @property
    def k(self) -> int:
        return self.u_tilde.shape[1]


def _fix_column_signs(m: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(m), axis=0)
    signs = np.sign(m[idx, np.arange(m.shape[1])])
    signs[signs == 0] = 1.0
    return m * signs


def _check_rank(singular_values: np.ndarray, k: int) -> None:
    smax = singular_values[0] if singular_values.size else 0.0
    rank = int(np.sum(singular_values > RANK_REL_TOL * smax)) if smax > 0 else 0
    if rank < k:
        raise RankDeficientError(f"input has rank {rank} < requested {k}; reduce k")


def svd_basis(stack: np.ndarray, k: int) -> BasisMatrix:
    """First k left-singular vectors of the stacked embeddings."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 2:
        raise ShapeMismatchError("stack must be a matrix")
    if not 1 <= k <= min(stack.shape):
        raise ShapeMismatchError(f"k={k} exceeds min(stack shape)={min(stack.shape)}")
    if not np.all(np.isfinite(stack)):
        raise ShapeMismatchError("stack contains non-finite entries")
    u, s, _ = np.linalg.svd(stack, full_matrices=False)
    _check_rank(s, k)
    return BasisMatrix(_fix_column_signs(u[:, :k]), "svd")


def ica_basis(stack: np.ndarray, k: int, seed: int) -> BasisMatrix:
    """Independent component scores via symmetric fixed-point iteration.

    The stack is centered and whitened to k dimensions with an SVD; the
    unmixing rotation starts from a seeded random matrix and iterates the
    tanh (logcosh contrast) update with symmetric orthogonalization until
    the largest column-angle change drops below 1e-6 or 200 iterations
    elapse. Non-convergence is reported as a warning, not an error: the
    best iterate is still a usable basis.

    Returns n-by-k component scores with zero mean and unit variance.
    """
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 2:
        raise ShapeMismatchError("stack must be a matrix")
    n = stack.shape[0]
    if not 1 <= k <= min(stack.shape):
        raise ShapeMismatchError(f"k={k} exceeds min(stack shape)={min(stack.shape)}")
    if n < k + 1:
        raise ShapeMismatchError(f"need at least k+1={k + 1} rows, got {n}")

    centered = stack - stack.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    _check_rank(s, k)
    z = u[:, :k] * np.sqrt(n)  # whitened: z.T @ z / n == I

    rng = substream(seed, "ica")
    w = _sym_orth(rng.standard_normal((k, k)))
    converged = False
    for _ in range(ICA_MAX_ITER):
        est = z @ w
        g = np.tanh(est)
        g_prime = 1.0 - g**2
        w_new = _sym_orth(z.T @ g / n - w * g_prime.mean(axis=0))
        delta = float(np.max(np.abs(np.abs(np.sum(w_new * w, axis=0)) - 1.0)))
        w = w_new
        if delta < ICA_TOL:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"fixed-point iteration did not converge within {ICA_MAX_ITER} iterations",
            IcaConvergenceWarning,
        )

    scores = z @ w
    scores = scores - scores.mean(axis=0)
    scores = scores / scores.std(axis=0)
    return BasisMatrix(_fix_column_signs(scores), "ica", converged)


def _sym_orth(w: np.ndarray) -> np.ndarray:
    # w (w.T w)^(-1/2): columns become orthonormal without privileging any one
    vals, vecs = np.linalg.eigh(w.T @ w)
    vals = np.maximum(vals, 1e-300)
    return w @ (vecs * (1.0 / np.sqrt(vals))) @ vecs.T
