"""Sparse, graph-regularized joint embeddings for multi-view data.

Learns one sparse, single-signed feature matrix per data view so that each
view is predictable from a source-separated basis of the others, via
projected gradient descent. Includes graph builders, a ground-truth
simulation harness, and evaluation statistics.
"""

__version__ = "0.1.0"

from .energy import (
    EnergyReport,
    acc_gradient,
    acc_similarity,
    recon_gradient,
    recon_similarity,
    regularization_term,
    total_energy,
)
from .evaluation import (
    ComparisonReport,
    SplitPlan,
    make_split,
    paired_t_test,
    project_embeddings,
)
from .graph import (
    RegularizationGraph,
    correlation_threshold_graph,
    identity_graph,
    knn_graph,
)
from .matio import RawMatrix, read_matrix, write_matrix
from .optimizer import FitConfig, FitResult, fit, initialize, project
from .preprocess import DataView, align_views, standardize
from .simulation import (
    HarnessConfig,
    SimulationData,
    SimulationSpec,
    StudySpec,
    corruption_sensitivity,
    fit_on_train,
    generate,
    permutation_baseline,
    recovery_score,
    run_study,
)
from .source_sep import BasisMatrix, ica_basis, svd_basis

__all__ = [
    "__version__",
    "BasisMatrix",
    "ComparisonReport",
    "DataView",
    "EnergyReport",
    "FitConfig",
    "FitResult",
    "HarnessConfig",
    "RawMatrix",
    "RegularizationGraph",
    "SimulationData",
    "SimulationSpec",
    "SplitPlan",
    "StudySpec",
    "acc_gradient",
    "acc_similarity",
    "align_views",
    "correlation_threshold_graph",
    "corruption_sensitivity",
    "fit",
    "fit_on_train",
    "generate",
    "identity_graph",
    "initialize",
    "knn_graph",
    "make_split",
    "paired_t_test",
    "permutation_baseline",
    "project",
    "project_embeddings",
    "read_matrix",
    "recon_gradient",
    "recon_similarity",
    "recovery_score",
    "regularization_term",
    "run_study",
    "standardize",
    "svd_basis",
    "ica_basis",
    "total_energy",
    "write_matrix",
]
