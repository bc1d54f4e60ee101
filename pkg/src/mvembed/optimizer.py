"""Projected gradient descent over per-view feature matrices.

Each iteration refreshes the cross-view bases from the current embeddings,
takes a per-view gradient step on the selected similarity, and projects the
candidate back onto the constraint set (graph smoothing, sparsification,
single-sign unification). A step is kept only if it strictly lowers the
total energy below the best total recorded so far, which makes the trace of
accepted iterations strictly decreasing by construction even though the
basis refresh between iterations can perturb the energy landscape.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, substream
from .energy import (
    NORMS,
    SIMILARITIES,
    EnergyReport,
    DegenerateEmbeddingError,
    regularization_term,
    signed_similarity,
    similarity_gradient,
)
from .exceptions import InvalidConfigError, RankDeficientError, ShapeMismatchError
from .graph import RegularizationGraph
from .preprocess import DataView
from .source_sep import BasisMatrix, ica_basis, svd_basis

SEPARATIONS = ("svd", "ica")
INITIALIZATIONS = ("joint_svd", "joint_ica", "random", "provided")
LINE_SEARCH_HALVINGS = 20


@dataclass
class FitConfig:
    """Solver settings. Per-view sparseness lives on the DataView."""

    k: int
    similarity: str = "recon"
    separation: str = "svd"
    norm: str = "l0"
    max_iterations: int = 100
    tolerance: float = 1e-6
    initialization: str = "joint_svd"
    seed: int = 0
    provided: list[np.ndarray] | None = None


@dataclass
class TraceEntry:
    iteration: int
    report: EnergyReport
    accepted: list[bool]


@dataclass
class FitResult:
    vs: list[np.ndarray]
    us: list[np.ndarray]
    trace: list[TraceEntry]
    iterations: int
    converged: bool
    step_sizes: list[float]
    initial_energy: EnergyReport
    config: FitConfig = field(repr=False, default=None)

    @property
    def final_energy(self) -> EnergyReport:
        return self.trace[-1].report if self.trace else self.initial_energy

    @property
    def final_similarity(self) -> float:
        return sum(self.final_energy.per_view_similarity)


def _keep_count(p: int, gamma: float) -> int:
    # ceil((1-gamma)*p) with a guard against float dust pushing exact
    # integers up one bucket
    return max(1, min(p, math.ceil((1.0 - gamma) * p - 1e-9)))


def project(v_col: np.ndarray, g: RegularizationGraph, gamma: float, norm: str = "l0") -> np.ndarray:
    """Smooth, sparsify, and sign-unify one feature column.

    1. smooth: w = G v
    2. threshold: keep the ceil((1-gamma)*p) largest-|.| entries (hard, the
       default); under the l1 norm, soft-threshold by the first discarded
       magnitude instead
    3. sign-unify: zero whichever sign carries less absolute mass
    4. never return the zero vector: fall back to the single largest-|.|
       entry of w
    """
    if not 0.0 <= gamma < 1.0:
        raise InvalidConfigError(f"gamma={gamma} must lie in [0, 1)")
    w = np.asarray(g.apply(v_col), dtype=float).ravel()
    p = w.shape[0]
    q = _keep_count(p, gamma)

    order = np.argsort(-np.abs(w), kind="stable")
    kept = np.zeros(p)
    if norm == "l1" and q < p:
        lam = np.abs(w[order[q]])
        shrunk = np.sign(w) * np.maximum(np.abs(w) - lam, 0.0)
        kept[order[:q]] = shrunk[order[:q]]
    else:
        kept[order[:q]] = w[order[:q]]

    pos_mass = kept[kept > 0].sum()
    neg_mass = -kept[kept < 0].sum()
    if pos_mass >= neg_mass:
        kept[kept < 0] = 0.0
    else:
        kept[kept > 0] = 0.0

    if not np.any(kept):
        j = int(np.argmax(np.abs(w)))
        kept[j] = w[j]
    return kept


def project_matrix(v: np.ndarray, g: RegularizationGraph, gamma: float, norm: str = "l0") -> np.ndarray:
    return np.column_stack([project(v[:, c], g, gamma, norm) for c in range(v.shape[1])])


def _validate(views: list[DataView], config: FitConfig) -> None:
    if len(views) < 2:
        raise InvalidConfigError(f"need at least 2 views, got {len(views)}")
    n = views[0].n
    for i, view in enumerate(views):
        if view.n != n:
            raise InvalidConfigError(f"view {i} has {view.n} rows, expected {n}")
        if not 0.0 <= view.sparseness < 1.0:
            raise InvalidConfigError(f"view {i} sparseness {view.sparseness} not in [0, 1)")
        if view.graph.dim != view.p:
            raise ShapeMismatchError(f"view {i} graph dim {view.graph.dim} != p {view.p}")
    if not 1 <= config.k <= n - 1:
        raise InvalidConfigError(f"k={config.k} must satisfy 1 <= k <= n-1 = {n - 1}")
    if config.similarity not in SIMILARITIES:
        raise InvalidConfigError(f"similarity must be one of {SIMILARITIES}")
    if config.separation not in SEPARATIONS:
        raise InvalidConfigError(f"separation must be one of {SEPARATIONS}")
    if config.norm not in NORMS:
        raise InvalidConfigError(f"norm must be one of {NORMS}")
    if config.initialization not in INITIALIZATIONS:
        raise InvalidConfigError(f"initialization must be one of {INITIALIZATIONS}")
    if config.tolerance <= 0:
        raise InvalidConfigError("tolerance must be positive")
    if config.max_iterations < 0:
        raise InvalidConfigError("max_iterations must be non-negative")


def _separate(stack: np.ndarray, k: int, separation: str, seed: int) -> BasisMatrix:
    if separation == "svd":
        return svd_basis(stack, k)
    return ica_basis(stack, k, seed)


def _align_to_previous(u_new: np.ndarray, u_prev: np.ndarray) -> np.ndarray:
    """Permute and sign-flip basis columns to track the previous iterate.

    SVD order can swap when singular values cross and ICA recovers
    components in arbitrary order; greedy matching on |cross-correlation|
    keeps each view's feature matrix paired with a stable basis column.
    """
    k = u_new.shape[1]
    c = u_prev.T @ u_new
    perm = np.empty(k, dtype=int)
    signs = np.empty(k)
    score = np.abs(c).astype(float)
    for _ in range(k):
        i, j = np.unravel_index(np.argmax(score), score.shape)
        perm[i] = j
        signs[i] = 1.0 if c[i, j] >= 0 else -1.0
        score[i, :] = -1.0
        score[:, j] = -1.0
    return u_new[:, perm] * signs[None, :]


def _refresh_bases(
    views: list[DataView],
    vs: list[np.ndarray],
    config: FitConfig,
    previous: list[BasisMatrix] | None = None,
) -> list[BasisMatrix]:
    embeddings = [view.x @ v for view, v in zip(views, vs)]
    bases = []
    for i in range(len(views)):
        stack = np.hstack([emb for j, emb in enumerate(embeddings) if j != i])
        basis = _separate(stack, config.k, config.separation, derive_seed(config.seed, "basis", i))
        if previous is not None:
            basis = BasisMatrix(
                _align_to_previous(basis.u_tilde, previous[i].u_tilde), basis.method, basis.converged
            )
        bases.append(basis)
    return bases


def initialize(views: list[DataView], config: FitConfig) -> tuple[list[np.ndarray], list[BasisMatrix]]:
    """Starting feature matrices (already projected) and their bases."""
    _validate(views, config)
    if config.initialization in ("joint_svd", "joint_ica"):
        stacked = np.hstack([view.x for view in views])
        method = "svd" if config.initialization == "joint_svd" else "ica"
        w = _separate(stacked, config.k, method, derive_seed(config.seed, "init"))
        vs = [
            project_matrix(view.x.T @ w.u_tilde, view.graph, view.sparseness, config.norm)
            for view in views
        ]
    elif config.initialization == "random":
        vs = []
        for i, view in enumerate(views):
            v0 = substream(config.seed, "init", i).standard_normal((view.p, config.k))
            vs.append(project_matrix(v0, view.graph, view.sparseness, config.norm))
    else:  # provided
        if config.provided is None or len(config.provided) != len(views):
            raise ShapeMismatchError("initialization 'provided' needs one matrix per view")
        vs = []
        for i, (view, v0) in enumerate(zip(views, config.provided)):
            v0 = np.asarray(v0, dtype=float)
            if v0.shape != (view.p, config.k):
                raise ShapeMismatchError(
                    f"provided matrix {i} is {v0.shape}, expected {(view.p, config.k)}"
                )
            vs.append(project_matrix(v0, view.graph, view.sparseness, config.norm))
    return vs, _refresh_bases(views, vs, config)


def fit(views: list[DataView], config: FitConfig) -> FitResult:
    """Run the descent loop until convergence or max_iterations.

    Convergence: relative total-energy decrease below tolerance on two
    consecutive accepted iterations, or an iteration in which no view
    accepts a step. Deterministic given (views, config.seed).
    """
    _validate(views, config)
    m = len(views)
    vs, bases = initialize(views, config)
    sims = [signed_similarity(v_.x, b, v, config.similarity) for v_, b, v in zip(views, bases, vs)]
    regs = [regularization_term(v, v_.graph, v_.sparseness, config.norm) for v_, v in zip(views, vs)]
    initial = EnergyReport.build(sims, regs)

    best_total = initial.total
    trace: list[TraceEntry] = []
    last_eps: list[float | None] = [None] * m
    small_streak = 0
    converged = False
    iteration = 0

    for iteration in range(1, config.max_iterations + 1):
        try:
            bases = _refresh_bases(views, vs, config, previous=bases)
        except RankDeficientError as exc:
            warnings.warn(f"stopping at iteration {iteration}: {exc}", RuntimeWarning)
            iteration -= 1
            break
        sims = [
            signed_similarity(v_.x, b, v, config.similarity) for v_, b, v in zip(views, bases, vs)
        ]
        regs = [regularization_term(v, v_.graph, v_.sparseness, config.norm) for v_, v in zip(views, vs)]
        actual = sum(sims) + sum(regs)
        bar = min(actual, best_total)
        accepted = [False] * m

        for i, view in enumerate(views):
            grad = similarity_gradient(view.x, bases[i], vs[i], config.similarity)
            gmax = float(np.max(np.abs(grad)))
            if not np.isfinite(gmax) or gmax == 0.0:
                continue
            eps0 = 2.0 * last_eps[i] if last_eps[i] is not None else 1.0 / gmax
            for halving in range(LINE_SEARCH_HALVINGS + 1):
                eps = eps0 / 2.0**halving
                candidate = project_matrix(
                    vs[i] - eps * grad, view.graph, view.sparseness, config.norm
                )
                try:
                    cand_sim = signed_similarity(view.x, bases[i], candidate, config.similarity)
                except DegenerateEmbeddingError:
                    continue
                cand_reg = regularization_term(candidate, view.graph, view.sparseness, config.norm)
                cand_total = actual - (sims[i] + regs[i]) + (cand_sim + cand_reg)
                if cand_total < bar:
                    vs[i] = candidate
                    sims[i], regs[i] = cand_sim, cand_reg
                    actual = cand_total
                    bar = actual
                    last_eps[i] = eps
                    accepted[i] = True
                    break

        if not any(accepted):
            converged = True
            break

        report = EnergyReport.build(sims, regs)
        trace.append(TraceEntry(iteration, report, accepted))
        rel = (best_total - report.total) / max(abs(best_total), 1e-30)
        best_total = report.total
        small_streak = small_streak + 1 if rel < config.tolerance else 0
        if small_streak >= 2:
            converged = True
            break

    us = [view.x @ v for view, v in zip(views, vs)]
    step_sizes = [e if e is not None else 0.0 for e in last_eps]
    return FitResult(vs, us, trace, iteration, converged, step_sizes, initial, config)
