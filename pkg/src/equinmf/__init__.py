"""Graph-regularized multi-view NMF clustering with data-derived parameters."""

from .dataviews import (
    DataError,
    MultiViewDataset,
    ViewMatrix,
    concatenate,
    load_mfeat,
    load_views,
    make_synthetic,
    normalize,
    normalize_dataset,
)
from .evaluation import accuracy, kmeans, nmi, welch_ttest
from .factorize import (
    EquiParams,
    FactorizationResult,
    SolverDivergence,
    SolverOptions,
    equinmf,
    gnmf,
    init_factors,
    multinmf,
    nmf,
)
from .graph import SimilarityGraph, combine_graphs, knn_graph, mean_weight
from .heuristics import alpha_heuristic, gamma_heuristic, heuristic_params
from .objectives import objective_value

__version__ = "0.1.0"
