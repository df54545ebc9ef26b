"""k-means on embeddings and clustering scores against ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

__all__ = [
    "ClusterRun",
    "EvalReport",
    "TTestResult",
    "kmeans",
    "contingency",
    "accuracy",
    "nmi",
    "welch_ttest",
    "summarize",
]


@dataclass
class ClusterRun:
    labels: np.ndarray
    sse: float
    repeats_used: int
    seed: int
    sse_history: List[float] = field(default_factory=list)


class TTestResult(NamedTuple):
    t: float
    p: float
    significant: bool


@dataclass
class EvalReport:
    """Per-method accuracy and NMI over repeated runs."""

    method: str
    accuracy: List[float]
    nmi: List[float]
    significance: Dict[str, dict] = field(default_factory=dict)

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracy))

    @property
    def accuracy_std(self) -> float:
        return _std(self.accuracy)

    @property
    def nmi_mean(self) -> float:
        return float(np.mean(self.nmi))

    @property
    def nmi_std(self) -> float:
        return _std(self.nmi)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "nmi_mean": self.nmi_mean,
            "nmi_std": self.nmi_std,
            "accuracy": [float(a) for a in self.accuracy],
            "nmi": [float(a) for a in self.nmi],
            "significance": self.significance,
        }

    def csv_rows(self, dataset: str = "") -> List[tuple]:
        """``(method, dataset, metric, mean, std)`` rows, one per metric."""
        return [
            (self.method, dataset, "accuracy", self.accuracy_mean, self.accuracy_std),
            (self.method, dataset, "nmi", self.nmi_mean, self.nmi_std),
        ]


def _std(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def _sq_dist(points, centers):
    d = ((points * points).sum(axis=1)[:, None] - 2.0 * points @ centers.T
         + (centers * centers).sum(axis=1)[None, :])
    return np.maximum(d, 0.0)


def _sse(points, labels, centers):
    diff = points - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _centers(points, labels, k):
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    return sums / np.maximum(counts, 1.0)[:, None]


def _repair_empty(points, labels, k):
    """Give each empty cluster the point farthest from the largest cluster's centroid."""
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        centroid = points[members].mean(axis=0)
        far = members[np.argmax(((points[members] - centroid) ** 2).sum(axis=1))]
        labels[far] = empty
        counts[big] -= 1
        counts[empty] += 1
    return labels


def _lloyd(points, init_idx, iters):
    k = len(init_idx)
    centers = points[init_idx].copy()
    labels = np.argmin(_sq_dist(points, centers), axis=1)
    labels = _repair_empty(points, labels, k)
    centers = _centers(points, labels, k)
    history = [_sse(points, labels, centers)]
    for _ in range(iters - 1):
        new = np.argmin(_sq_dist(points, centers), axis=1)
        new = _repair_empty(points, new, k)
        if np.array_equal(new, labels):
            break
        labels = new
        centers = _centers(points, labels, k)
        history.append(_sse(points, labels, centers))
    return labels, history


def kmeans(points, k: int, repeats: int = 20, iters: int = 100, seed: int = 0) -> ClusterRun:
    """Best-of-``repeats`` Lloyd's algorithm on the rows of ``points``.

    Each repeat starts from ``k`` distinct rows drawn uniformly at random.
    The repeat with the lowest within-cluster sum of squares wins; ties go
    to the earlier repeat.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the number of points {n}")
    if repeats < 1 or iters < 1:
        raise ValueError("repeats and iters must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(repeats):
        init_idx = rng.choice(n, size=k, replace=False)
        labels, history = _lloyd(points, init_idx, iters)
        if best is None or history[-1] < best[1][-1]:
            best = (labels, history)
    labels, history = best
    return ClusterRun(labels, history[-1], repeats, seed, history)


def contingency(pred, truth) -> np.ndarray:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1 if p.size else 0, t.max() + 1 if t.size else 0), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth) -> float:
    """Fraction of samples agreeing under the best one-to-one cluster/class matching."""
    table = contingency(pred, truth)
    if table.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies (nats)."""
    table = contingency(pred, truth).astype(np.float64)
    n = table.sum()
    if n == 0:
        return 0.0
    pxy = table / n
    # marginals from integer counts so a single-cluster labeling has exactly zero entropy
    px = table.sum(axis=1) / n
    py = table.sum(axis=0) / n
    # fsum is order-independent, which keeps nmi(a, b) == nmi(b, a) bit for bit
    hx = -math.fsum(px * np.log(px))
    hy = -math.fsum(py * np.log(py))
    if hx == 0.0 or hy == 0.0:
        # single-cluster labelings: identical partitions only when both are trivial
        return 1.0 if hx == 0.0 and hy == 0.0 else 0.0
    nz = pxy > 0
    mi = math.fsum(pxy[nz] * np.log(pxy[nz] / np.outer(px, py)[nz]))
    return min(max(mi / math.sqrt(hx * hy), 0.0), 1.0)


def welch_ttest(a, b, alpha: float = 0.05) -> TTestResult:
    """Two-sided unequal-variance t-test; significant when ``p < alpha``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if va == 0 and vb == 0:
        if diff == 0:
            return TTestResult(0.0, 1.0, False)
        return TTestResult(math.copysign(math.inf, diff), 0.0, True)
    res = stats.ttest_ind(a, b, equal_var=False)
    t, p = float(res.statistic), float(res.pvalue)
    return TTestResult(t, p, p < alpha)


def summarize(method: str, accuracies, nmis) -> EvalReport:
    return EvalReport(method, [float(x) for x in accuracies], [float(x) for x in nmis])
