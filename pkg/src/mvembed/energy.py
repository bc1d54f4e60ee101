"""Similarity terms, their analytic gradients, and the total energy report.

Two similarity options per view: squared reconstruction error of the view
from the cross-view basis, and absolute canonical covariance (ACC) between
the view's embedding and that basis. The solver minimizes throughout, so
ACC (a quality to maximize) enters the total negated.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateEmbeddingError, ShapeMismatchError
from .graph import RegularizationGraph
from .preprocess import DataView
from .source_sep import BasisMatrix

L0_THRESHOLD = 1e-12
SIMILARITIES = ("recon", "acc")
NORMS = ("l0", "l1")


@dataclass
class EnergyReport:
    per_view_similarity: list[float]
    regularization: list[float]
    total: float

    @classmethod
    def build(cls, sims, regs) -> "EnergyReport":
        sims = [float(s) for s in sims]
        regs = [float(r) for r in regs]
        return cls(sims, regs, sum(sims) + sum(regs))


def _check_shapes(x, u_tilde, v):
    n, p = x.shape
    if u_tilde.shape[0] != n:
        raise ShapeMismatchError(f"basis has {u_tilde.shape[0]} rows, view has {n}")
    if v.shape[0] != p:
        raise ShapeMismatchError(f"features have {v.shape[0]} rows, view has {p} columns")
    if u_tilde.shape[1] != v.shape[1]:
        raise ShapeMismatchError(f"basis rank {u_tilde.shape[1]} != feature rank {v.shape[1]}")


def recon_similarity(x: np.ndarray, u_tilde: np.ndarray, v: np.ndarray) -> float:
    """Squared Frobenius error of reconstructing x as u_tilde @ v.T."""
    _check_shapes(x, u_tilde, v)
    resid = x - u_tilde @ v.T
    return float(np.sum(resid**2))


def recon_gradient(x: np.ndarray, u_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
    _check_shapes(x, u_tilde, v)
    return -2.0 * (x.T - v @ u_tilde.T) @ u_tilde


def acc_similarity(x: np.ndarray, u_tilde: np.ndarray, v: np.ndarray) -> float:
    """Absolute canonical covariance between the embedding x@v and the basis.

    Sum of absolute diagonal covariances, normalized by the Frobenius norms
    of both factors; scale-invariant in v.
    """
    _check_shapes(x, u_tilde, v)
    emb = x @ v
    emb_norm = float(np.linalg.norm(emb))
    if emb_norm < 1e-300:
        raise DegenerateEmbeddingError("embedding x @ v is numerically zero")
    a = u_tilde.T @ emb
    return float(np.trace(np.abs(a)) / (np.linalg.norm(u_tilde) * emb_norm))


def acc_gradient(x: np.ndarray, u_tilde: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Analytic gradient of acc_similarity with respect to v.

    Uses the subgradient value 0 for |.| at zero crossings; validated
    against finite differences away from those points.
    """
    _check_shapes(x, u_tilde, v)
    emb = x @ v
    emb_norm = float(np.linalg.norm(emb))
    if emb_norm < 1e-300:
        raise DegenerateEmbeddingError("embedding x @ v is numerically zero")
    u_norm = float(np.linalg.norm(u_tilde))
    c = u_norm * emb_norm
    diag = np.einsum("ij,ij->j", u_tilde, emb)  # diagonal of u_tilde.T @ emb
    numer_grad = (x.T @ u_tilde) * np.sign(diag)[None, :]
    trace_abs = float(np.sum(np.abs(diag)))
    return numer_grad / c - (trace_abs / (c * emb_norm**2)) * (x.T @ emb)


def regularization_term(
    v: np.ndarray, g: RegularizationGraph, gamma: float, norm: str = "l0"
) -> float:
    """gamma-weighted lp norm of each smoothed feature column, summed."""
    if not 0.0 <= gamma < 1.0:
        raise ShapeMismatchError(f"gamma={gamma} must lie in [0, 1)")
    if v.shape[0] != g.dim:
        raise ShapeMismatchError(f"features have {v.shape[0]} rows, graph dim is {g.dim}")
    smoothed = g.apply(v)
    if norm == "l0":
        value = float(np.sum(np.abs(smoothed) > L0_THRESHOLD))
    elif norm == "l1":
        value = float(np.sum(np.abs(smoothed)))
    else:
        raise ShapeMismatchError(f"unknown norm {norm!r}")
    return gamma * value


def signed_similarity(
    x: np.ndarray, basis: BasisMatrix, v: np.ndarray, similarity: str
) -> float:
    """Similarity as a quantity to minimize (ACC enters negated)."""
    if similarity == "recon":
        return recon_similarity(x, basis.u_tilde, v)
    if similarity == "acc":
        return -acc_similarity(x, basis.u_tilde, v)
    raise ShapeMismatchError(f"unknown similarity {similarity!r}")


def similarity_gradient(
    x: np.ndarray, basis: BasisMatrix, v: np.ndarray, similarity: str
) -> np.ndarray:
    if similarity == "recon":
        return recon_gradient(x, basis.u_tilde, v)
    if similarity == "acc":
        return -acc_gradient(x, basis.u_tilde, v)
    raise ShapeMismatchError(f"unknown similarity {similarity!r}")


def total_energy(
    views: list[DataView],
    vs: list[np.ndarray],
    bases: list[BasisMatrix],
    similarity: str = "recon",
    norm: str = "l0",
) -> EnergyReport:
    if not len(views) == len(vs) == len(bases):
        raise ShapeMismatchError(
            f"got {len(views)} views, {len(vs)} feature matrices, {len(bases)} bases"
        )
    sims = [signed_similarity(view.x, basis, v, similarity) for view, v, basis in zip(views, vs, bases)]
    regs = [regularization_term(v, view.graph, view.sparseness, norm) for view, v in zip(views, vs)]
    return EnergyReport.build(sims, regs)
