"""Sample-affinity graphs: binary kNN construction, summation and Laplacians."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .dataviews import DataError, ViewMatrix

__all__ = [
    "SimilarityGraph",
    "knn_graph",
    "combine_graphs",
    "mean_weight",
    "write_coo",
]


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Symmetric nonnegative ``(N, N)`` weight matrix with zero diagonal.

    ``degree`` holds the row sums ``D``; ``laplacian()`` materializes
    ``D - W``. Products against the weights go through ``sparse_weights``,
    a cached CSR copy, since kNN graphs have few edges per row.
    """

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64, copy=True)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DataError(f"weight matrix must be square, got {W.shape}")
        if not np.array_equal(W, W.T):
            raise DataError("weight matrix is not symmetric")
        if np.any(np.diag(W) != 0):
            raise DataError("weight matrix has a nonzero diagonal")
        if W.size and W.min() < 0:
            raise DataError("weight matrix has negative entries")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n_nodes(self) -> int:
        return self.W.shape[0]

    @cached_property
    def degree(self) -> np.ndarray:
        d = self.W.sum(axis=1)
        d.setflags(write=False)
        return d

    @cached_property
    def sparse_weights(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.W)

    def laplacian(self) -> np.ndarray:
        return np.diag(self.degree) - self.W

    def quadratic_form(self, V) -> float:
        """``Tr(V^T (D - W) V)`` without forming the Laplacian."""
        V = np.asarray(V, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
        dv = (self.degree[:, None] * V * V).sum()
        wv = (V * (self.sparse_weights @ V)).sum()
        return float(dv - wv)


def knn_graph(view, k: int = 5) -> SimilarityGraph:
    """Binary k-nearest-neighbour graph over the samples (columns) of ``view``.

    ``W[i, j] = 1`` when ``j`` is among the ``k`` Euclidean nearest
    neighbours of ``i`` or vice versa. Equal distances are broken in favour
    of the smaller sample index.
    """
    X = view.values if isinstance(view, ViewMatrix) else np.asarray(view, dtype=np.float64)
    n = X.shape[1]
    if not 1 <= k < n:
        raise DataError(f"k must satisfy 1 <= k < N={n}, got {k}")
    sq = (X * X).sum(axis=0)
    dist = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.maximum(dist, 0.0, out=dist)
    np.fill_diagonal(dist, np.inf)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    W = np.zeros((n, n))
    W[np.repeat(np.arange(n), k), nearest.ravel()] = 1.0
    W = np.maximum(W, W.T)
    return SimilarityGraph(W)


def combine_graphs(graphs) -> SimilarityGraph:
    """Elementwise sum of graphs over the same samples."""
    graphs = list(graphs)
    if not graphs:
        raise DataError("no graphs to combine")
    n = graphs[0].n_nodes
    total = np.zeros((n, n))
    for g in graphs:
        if g.n_nodes != n:
            raise DataError(f"graph over {g.n_nodes} nodes cannot be added to one over {n}")
        total += g.W
    return SimilarityGraph(total)


def mean_weight(graph: SimilarityGraph) -> float:
    """Mean of ``W`` over all ``N**2`` entries, diagonal included."""
    n = graph.n_nodes
    if n == 0:
        return 0.0
    return float(graph.W.sum() / (n * n))


def write_coo(graph: SimilarityGraph, path) -> None:
    """Dump the nonzero weights as ``row col weight`` lines, for debugging."""
    rows, cols = np.nonzero(graph.W)
    with open(path, "w") as fh:
        for r, c in zip(rows, cols):
            fh.write(f"{r} {c} {float(graph.W[r, c])!r}\n")
