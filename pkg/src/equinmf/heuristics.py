"""Data-derived view weights and graph weight for EquiNMF.

Each view's weight is its feature count, which balances the expected size of
the per-view terms in the V-update numerator for L1-normalized data and
bases. The graph weight puts the graph term on the same footing as the
``n_v`` data terms combined.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataviews import MultiViewDataset
from .factorize import EquiParams
from .graph import SimilarityGraph, mean_weight

__all__ = [
    "HeuristicError",
    "HeuristicReport",
    "alpha_heuristic",
    "gamma_heuristic",
    "heuristic_params",
    "expected_contribution_check",
]


class HeuristicError(ValueError):
    pass


@dataclass(frozen=True)
class HeuristicReport:
    alpha: tuple
    gamma: float
    n_views: int
    K: int
    N: int
    mean_weight: float

    def to_dict(self):
        d = asdict(self)
        d["alpha"] = list(self.alpha)
        return d


def alpha_heuristic(dataset: MultiViewDataset) -> tuple:
    """One weight per view, equal to its number of features."""
    return tuple(float(m) for m in dataset.feature_counts)


def gamma_heuristic(n_views: int, K: int, N: int, graph: SimilarityGraph) -> float:
    """``n_views * K / (N * mean_weight(graph))``."""
    m = mean_weight(graph)
    if not m > 0:
        raise HeuristicError("graph has no edges; supply gamma explicitly")
    return n_views * K / (N * m)


def heuristic_params(dataset: MultiViewDataset, graph: SimilarityGraph, K: int,
                     gamma_multiplier: float = 1.0):
    """Build :class:`EquiParams` and the matching :class:`HeuristicReport`."""
    alpha = alpha_heuristic(dataset)
    gamma = gamma_heuristic(dataset.n_views, K, dataset.n_samples, graph)
    report = HeuristicReport(alpha, gamma, dataset.n_views, K, dataset.n_samples,
                             mean_weight(graph))
    return EquiParams(alpha, gamma, gamma_multiplier), report


def expected_contribution_check(dataset: MultiViewDataset, factors, alpha, gamma,
                                graph: SimilarityGraph) -> dict:
    """Average size of each term in the V-update numerator.

    Returns the mean over all entries of ``alpha_v X_v^T U_v`` for every
    view, the mean of ``gamma W V``, and the ratios the weighting scheme is
    meant to keep near one: largest over smallest view term, and graph term
    over the summed view terms.
    """
    V = factors.V
    view_means = []
    for view, U, a in zip(dataset.views, factors.U_views, alpha, strict=True):
        s = U.sum(axis=0)
        Un = U / np.where(s > 0, s, 1.0)
        view_means.append(float(a * (view.values.T @ Un).mean()))
    graph_mean = float(gamma * (graph.sparse_weights @ V).mean())
    data_total = float(sum(view_means))
    return {
        "view_means": view_means,
        "graph_mean": graph_mean,
        "data_total": data_total,
        "view_ratio": max(view_means) / min(view_means) if min(view_means) > 0 else float("inf"),
        "graph_to_data": graph_mean / data_total if data_total > 0 else float("inf"),
    }
