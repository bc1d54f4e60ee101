"""Train/test splits, embedding projection, and the statistics used by the
recovery harness.

The t and F tail probabilities are computed from a locally implemented
continued-fraction regularized incomplete beta, so the statistics carry no
dependency and can be checked against an independent evaluation in tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSplitError, LengthMismatchError, ShapeMismatchError


@dataclass
class SplitPlan:
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int


@dataclass
class ComparisonReport:
    method_a_scores: list[float]
    method_b_scores: list[float]
    mean_diff: float
    t_statistic: float
    p_value: float
    dof: int
    degenerate: bool = False


@dataclass
class RegressionFit:
    intercept: float
    coefficients: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(x, dtype=float) @ self.coefficients


def make_split(n: int, train_fraction: float, seed: int) -> SplitPlan:
    """Seeded shuffle; the first round(fraction*n) rows train.

    The train count is clamped to [1, n-1] so both parts stay non-empty.
    """
    if n < 2:
        raise DegenerateSplitError(f"need at least 2 rows to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplitError(f"train_fraction={train_fraction} must lie in (0, 1)")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed)


def project_embeddings(v: np.ndarray, x_new: np.ndarray) -> np.ndarray:
    """Embed new rows (standardized with training statistics) as x_new @ v."""
    v = np.asarray(v, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape[1] != v.shape[0]:
        raise ShapeMismatchError(f"x_new has {x_new.shape[1]} columns, v has {v.shape[0]} rows")
    return x_new @ v


def least_squares_fit(x: np.ndarray, y: np.ndarray) -> RegressionFit:
    """OLS with intercept; singular designs fall back to the minimum-norm
    pseudo-inverse solution rather than failing."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(x.shape[0]), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return RegressionFit(float(coef[0]), coef[1:])


def r_squared(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SSE/SST; may be negative, never clamped."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    sse = float(np.sum((y_true - y_pred) ** 2))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        return 1.0 if sse < 1e-30 else float("-inf")
    return 1.0 - sse / sst


def paired_t_test(a, b) -> ComparisonReport:
    """Classical paired t statistic with a two-sided p-value.

    All-zero differences give (t=0, p=1); zero-variance nonzero differences
    are flagged degenerate and reported as (t=+/-inf, p=0).
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if len(a) != len(b):
        raise LengthMismatchError(f"lists differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise LengthMismatchError(f"need at least 2 pairs, got {n}")
    diff = np.asarray(a) - np.asarray(b)
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    dof = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return ComparisonReport(a, b, 0.0, 0.0, 1.0, dof)
        t = math.inf if mean > 0 else -math.inf
        return ComparisonReport(a, b, mean, t, 0.0, dof, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return ComparisonReport(a, b, mean, t, student_t_two_sided(t, dof), dof)


def student_t_two_sided(t: float, dof: int) -> float:
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom."""
    if not math.isfinite(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def f_test_sf(f: float, dof1: int, dof2: int) -> float:
    """P(F >= f) for the F distribution."""
    if f <= 0.0:
        return 1.0
    if not math.isfinite(f):
        return 0.0
    x = dof2 / (dof2 + dof1 * f)
    return regularized_incomplete_beta(dof2 / 2.0, dof1 / 2.0, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the continued-fraction expansion (relative tol 1e-12)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_continued_fraction(a: float, b: float, x: float, tol: float = 1e-12) -> float:
    # modified Lentz iteration
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        coeff = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coeff * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + coeff / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        coeff = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coeff * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + coeff / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    return h
