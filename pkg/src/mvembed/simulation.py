"""Ground-truth multi-view simulation and the signal-recovery harness.

Each view is built as B @ S_j: a shared n-by-K latent weight matrix times a
view-specific smoothed random mixing matrix, after which a fraction of each
view's columns is overwritten with pure noise. Recovery is scored by
regressing a latent column on the learned train embeddings and predicting
it in held-out test rows.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import derive_seed, substream
from .evaluation import f_test_sf, least_squares_fit, make_split, r_squared
from .exceptions import InvalidSpecError
from .graph import default_neighbor_count, identity_graph, knn_graph
from .matio import RawMatrix
from .optimizer import FitConfig, FitResult, fit
from .preprocess import ColumnStats, DataView, standardize

METHOD_TAGS = ("recon-svd", "recon-ica", "acc-svd", "acc-ica")


@dataclass
class SimulationSpec:
    n: int = 100
    p: tuple[int, ...] = (300, 400, 500)
    k_true: int = 4
    n_latent_eval: int = 1
    smoothing_widths: tuple[float, ...] = (0.05, 0.05, 0.05)
    corruption_fractions: tuple[float, ...] | str = "uniform-random"
    train_fraction: float = 0.8
    seed: int = 0

    @property
    def m(self) -> int:
        return len(self.p)

    def validate(self) -> None:
        if self.m < 2:
            raise InvalidSpecError(f"need at least 2 views, got {self.m}")
        if self.n < 5:
            raise InvalidSpecError(f"n={self.n} is too small to split")
        if any(pj < 2 for pj in self.p):
            raise InvalidSpecError(f"every view needs at least 2 predictors: {self.p}")
        if self.k_true < 1:
            raise InvalidSpecError("k_true must be positive")
        if self.n_latent_eval not in (1, 2):
            raise InvalidSpecError("n_latent_eval must be 1 or 2")
        if self.k_true < self.n_latent_eval:
            raise InvalidSpecError("k_true must cover every evaluated latent column")
        if len(self.smoothing_widths) != self.m:
            raise InvalidSpecError("one smoothing width per view required")
        if any(w < 0 for w in self.smoothing_widths):
            raise InvalidSpecError("smoothing widths must be non-negative")
        if isinstance(self.corruption_fractions, str):
            if self.corruption_fractions != "uniform-random":
                raise InvalidSpecError(f"unknown corruption mode {self.corruption_fractions!r}")
        else:
            if len(self.corruption_fractions) != self.m:
                raise InvalidSpecError("one corruption fraction per view required")
            if any(not 0.0 <= c <= 0.9 for c in self.corruption_fractions):
                raise InvalidSpecError("corruption fractions must lie in [0, 0.9]")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidSpecError("train_fraction must lie in (0, 1)")


@dataclass
class SimulationData:
    views: list[RawMatrix]
    b_true: np.ndarray
    corrupted_columns: list[np.ndarray]
    train_rows: np.ndarray
    test_rows: np.ndarray
    mixing: list[np.ndarray]
    spec: SimulationSpec


def _smooth_rows(rows: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average along each row with reflected boundaries."""
    if window <= 1:
        return rows
    p = rows.shape[1]
    window = min(window, p)
    left, right = (window - 1) // 2, window // 2
    kernel = np.full(window, 1.0 / window)
    padded = np.pad(rows, ((0, 0), (left, right)), mode="reflect")
    return np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, padded)


def generate(spec: SimulationSpec) -> SimulationData:
    """Draw one simulated dataset. Deterministic given spec.seed."""
    spec.validate()
    rng = substream(spec.seed, "simulate")

    mixing = []
    for pj, width in zip(spec.p, spec.smoothing_widths):
        s = rng.standard_normal((spec.k_true, pj))
        window = max(1, int(round(width * pj)))
        mixing.append(_smooth_rows(s, window))

    b = rng.standard_normal((spec.n, spec.k_true))

    if isinstance(spec.corruption_fractions, str):
        fractions = rng.uniform(0.1, 0.9, size=spec.m)
    else:
        fractions = np.asarray(spec.corruption_fractions, dtype=float)

    views, corrupted = [], []
    row_ids = [f"s{i:04d}" for i in range(spec.n)]
    for j, (pj, s) in enumerate(zip(spec.p, mixing)):
        m_j = b @ s
        n_corrupt = int(round(fractions[j] * pj))
        cols = np.sort(rng.choice(pj, size=n_corrupt, replace=False))
        if n_corrupt:
            m_j[:, cols] = rng.standard_normal((spec.n, n_corrupt))
        corrupted.append(cols)
        views.append(RawMatrix(m_j, list(row_ids), [f"v{j}_{c:04d}" for c in range(pj)]))

    split = make_split(spec.n, spec.train_fraction, derive_seed(spec.seed, "split"))
    return SimulationData(views, b, corrupted, split.train_rows, split.test_rows, mixing, spec)


# ---------------------------------------------------------------------------
# fitting and scoring


@dataclass
class HarnessConfig:
    """How the recovery harness fits each simulated dataset."""

    similarity: str = "recon"
    separation: str = "svd"
    norm: str = "l0"
    k: int | None = None  # None: use the generating rank
    sparseness: float = 0.5
    graph: str = "knn"  # knn | identity
    graph_k: int | None = None
    max_iterations: int = 50
    tolerance: float = 1e-6
    initialization: str = "joint_svd"

    @property
    def method_tag(self) -> str:
        return f"{self.similarity}-{self.separation}"


@dataclass
class TrainedModel:
    result: FitResult
    stats: list[ColumnStats]
    harness: HarnessConfig


def _build_views(
    matrices: list[np.ndarray], data: SimulationData, harness: HarnessConfig
) -> tuple[list[DataView], list[ColumnStats]]:
    views, stats = [], []
    for j, values in enumerate(matrices):
        raw = RawMatrix(values, [f"t{r}" for r in range(values.shape[0])], list(data.views[j].col_ids))
        std = standardize(raw)
        if harness.graph == "knn":
            k = harness.graph_k or default_neighbor_count(std.x.shape[1])
            g = knn_graph(std.x, k)
        else:
            g = identity_graph(std.x.shape[1])
        views.append(DataView(std.x, g, harness.sparseness, name=f"view{j}"))
        stats.append(std.stats)
    return views, stats


def fit_on_train(data: SimulationData, harness: HarnessConfig, seed: int | None = None) -> TrainedModel:
    """Standardize the training rows, build graphs, and run the solver."""
    train = [v.values[data.train_rows] for v in data.views]
    views, stats = _build_views(train, data, harness)
    config = FitConfig(
        k=harness.k or data.spec.k_true,
        similarity=harness.similarity,
        separation=harness.separation,
        norm=harness.norm,
        max_iterations=harness.max_iterations,
        tolerance=harness.tolerance,
        initialization=harness.initialization,
        seed=data.spec.seed if seed is None else seed,
    )
    return TrainedModel(fit(views, config), stats, harness)


def prediction_r2(train_emb, test_emb, beta_train, beta_test) -> tuple[float, float]:
    """Train and test R-squared of the latent column regressed on embeddings."""
    model = least_squares_fit(train_emb, beta_train)
    return (
        r_squared(beta_train, model.predict(train_emb)),
        r_squared(beta_test, model.predict(test_emb)),
    )


def recovery_scores(model: TrainedModel, data: SimulationData, target: int = 0) -> tuple[float, float]:
    """(train, test) R-squared for one latent column.

    Test rows are standardized with the train-derived column statistics so
    no held-out information leaks into the embedding scale.
    """
    train_emb = np.hstack(model.result.us)
    test_emb = np.hstack(
        [
            stats.apply(view.values[data.test_rows]) @ v
            for view, stats, v in zip(data.views, model.stats, model.result.vs)
        ]
    )
    beta = data.b_true[:, target]
    return prediction_r2(train_emb, test_emb, beta[data.train_rows], beta[data.test_rows])


def recovery_score(model: TrainedModel, data: SimulationData, target: int = 0) -> float:
    """Held-out R-squared for one latent column (may be negative)."""
    return recovery_scores(model, data, target)[1]


def permutation_baseline(
    data: SimulationData,
    harness: HarnessConfig,
    n_perms: int,
    target: int = 0,
    identity_permutations: bool = False,
) -> list[float]:
    """Null R-squared distribution from independently row-shuffled views.

    Shuffling each view's rows separately destroys the cross-view alignment
    that carries the latent signal. ``identity_permutations`` is a test
    hook that applies no-op shuffles to confirm the pipeline reproduces the
    unpermuted score.
    """
    scores = []
    for idx in range(n_perms):
        rng = substream(data.spec.seed, "perm", idx)
        permuted = []
        for view in data.views:
            perm = np.arange(view.values.shape[0]) if identity_permutations else rng.permutation(
                view.values.shape[0]
            )
            permuted.append(RawMatrix(view.values[perm], list(view.row_ids), list(view.col_ids)))
        null_data = replace(data, views=permuted)
        model = fit_on_train(null_data, harness)
        scores.append(recovery_score(model, null_data, target))
    return scores


@dataclass
class SensitivityResult:
    p_value: float
    f_statistic: float
    coefficients: np.ndarray
    intercept: float


def corruption_sensitivity(scores, fractions) -> SensitivityResult:
    """Regress recovery scores on the per-view corruption fractions.

    Returns the overall F-test p-value of the 3-regressor model plus its
    coefficients; a perfect fit gives p=0 and a constant response p=1.
    """
    scores = np.asarray(scores, dtype=float)
    x = np.asarray(fractions, dtype=float)
    if x.ndim != 2 or x.shape[0] != scores.shape[0]:
        raise InvalidSpecError("fractions must be one row of per-view values per score")
    n, k = x.shape
    if n < k + 2:
        raise InvalidSpecError(f"need at least {k + 2} observations, got {n}")
    model = least_squares_fit(x, scores)
    pred = model.predict(x)
    sse = float(np.sum((scores - pred) ** 2))
    sst = float(np.sum((scores - scores.mean()) ** 2))
    ssr = max(sst - sse, 0.0)
    dof2 = n - k - 1
    if sst == 0.0 or ssr <= 1e-300:
        return SensitivityResult(1.0, 0.0, model.coefficients, model.intercept)
    if sse <= 1e-300:
        return SensitivityResult(0.0, float("inf"), model.coefficients, model.intercept)
    f_stat = (ssr / k) / (sse / dof2)
    return SensitivityResult(f_test_sf(f_stat, k, dof2), f_stat, model.coefficients, model.intercept)


# ---------------------------------------------------------------------------
# batch studies


@dataclass
class StudySpec:
    """Ranges for a batch of simulations; per-run values are drawn from the
    batch seed so the whole study replays from one integer."""

    runs: int = 30
    n: int = 100
    p: tuple[int, ...] = (300, 400, 500)
    k_range: tuple[int, int] = (3, 6)
    n_latent_eval: int = 1
    smoothing_range: tuple[float, float] = (0.02, 0.08)
    corruption: str | tuple[float, ...] = "uniform-random"
    train_fraction: float = 0.8
    seed: int = 0


@dataclass
class RunRecord:
    run: int
    seed: int
    n: int
    p: tuple[int, ...]
    k_true: int
    fractions: tuple[float, ...]
    method: str
    train_r2: list[float]  # one entry per evaluated latent column
    test_r2: list[float]
    runtime_s: float


def spec_for_run(study: StudySpec, run: int) -> SimulationSpec:
    rng = substream(study.seed, "study", run)
    k_true = int(rng.integers(study.k_range[0], study.k_range[1] + 1))
    widths = tuple(rng.uniform(*study.smoothing_range, size=len(study.p)))
    return SimulationSpec(
        n=study.n,
        p=study.p,
        k_true=k_true,
        n_latent_eval=study.n_latent_eval,
        smoothing_widths=widths,
        corruption_fractions=study.corruption,
        train_fraction=study.train_fraction,
        seed=derive_seed(study.seed, "sim", run),
    )


def run_one(study: StudySpec, run: int, methods, harness: HarnessConfig) -> list[RunRecord]:
    data = generate(spec_for_run(study, run))
    fractions = tuple(
        round(len(cols) / pj, 10) for cols, pj in zip(data.corrupted_columns, study.p)
    )
    records = []
    for tag in methods:
        similarity, separation = tag.split("-")
        hc = replace(harness, similarity=similarity, separation=separation)
        t0 = time.perf_counter()
        model = fit_on_train(data, hc)
        pairs = [recovery_scores(model, data, t) for t in range(data.spec.n_latent_eval)]
        elapsed = time.perf_counter() - t0
        records.append(
            RunRecord(
                run=run,
                seed=data.spec.seed,
                n=study.n,
                p=study.p,
                k_true=data.spec.k_true,
                fractions=fractions,
                method=tag,
                train_r2=[p[0] for p in pairs],
                test_r2=[p[1] for p in pairs],
                runtime_s=elapsed,
            )
        )
    return records


def run_study(
    study: StudySpec,
    methods=METHOD_TAGS,
    harness: HarnessConfig | None = None,
    jobs: int = 1,
) -> list[RunRecord]:
    """Run the batch; records are ordered by (run, method) regardless of jobs."""
    harness = harness or HarnessConfig()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_one_star, [(study, r, tuple(methods), harness) for r in range(study.runs)]))
    else:
        chunks = [run_one(study, r, methods, harness) for r in range(study.runs)]
    return [rec for chunk in chunks for rec in chunk]


def _run_one_star(args):
    return run_one(*args)
