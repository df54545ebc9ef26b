"""Multi-view data containers, mfeat ingestion, normalization and synthetic data.

Views are stored features x samples: a view with ``M`` features over ``N``
samples is an ``(M, N)`` array. The UCI files hold one sample per line, so
the loaders transpose on the way in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DataError",
    "ViewMatrix",
    "MultiViewDataset",
    "load_mfeat",
    "load_view_table",
    "load_views",
    "save_view_table",
    "normalize",
    "normalize_dataset",
    "concatenate",
    "make_synthetic",
]

NORM_STATES = ("raw", "l1_columns", "l2_columns")
MFEAT_ROWS = 2000
MFEAT_CLASS_SIZE = 200


class DataError(ValueError):
    """Raised for malformed, negative or dimensionally inconsistent data."""


@dataclass(frozen=True)
class ViewMatrix:
    """One nonnegative view, shape ``(n_features, n_samples)``."""

    values: np.ndarray
    norm_state: str = "raw"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"view must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite entry at (feature {i}, sample {j})")
        if values.size and values.min() < 0:
            i, j = np.argwhere(values < 0)[0]
            raise DataError(
                f"negative entry {values[i, j]!r} at (feature {i}, sample {j})"
            )
        if self.norm_state not in NORM_STATES:
            raise DataError(f"unknown norm_state {self.norm_state!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class MultiViewDataset:
    """Aligned views over the same ``N`` samples, with optional labels."""

    views: tuple
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        views = tuple(
            v if isinstance(v, ViewMatrix) else ViewMatrix(v) for v in self.views
        )
        if not views:
            raise DataError("a dataset needs at least one view")
        n = views[0].n_samples
        for idx, v in enumerate(views):
            if v.n_samples != n:
                raise DataError(
                    f"view {idx} has {v.n_samples} samples, view 0 has {n}"
                )
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise DataError(
                    f"labels have shape {labels.shape}, expected ({n},)"
                )
            labels = labels.astype(np.int64, copy=True)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_samples(self) -> int:
        return self.views[0].n_samples

    @property
    def feature_counts(self) -> tuple:
        return tuple(v.n_features for v in self.views)

    @property
    def n_classes(self) -> Optional[int]:
        if self.labels is None:
            return None
        return int(np.unique(self.labels).size)

    def with_views(self, views) -> "MultiViewDataset":
        return MultiViewDataset(tuple(views), self.labels, self.name)


def load_view_table(path, n_rows=None, n_cols=None) -> np.ndarray:
    """Read a whitespace-separated numeric table (one sample per line).

    Returns the table in file orientation, ``(n_rows, n_cols)``.
    """
    path = Path(path)
    try:
        table = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path} is not a numeric table: {exc}") from exc
    if n_rows is not None and table.shape[0] != n_rows:
        raise DataError(f"{path}: expected {n_rows} rows, found {table.shape[0]}")
    if n_cols is not None and table.shape[1] != n_cols:
        raise DataError(
            f"{path}: expected {n_cols} columns, found {table.shape[1]}"
        )
    if table.size and table.min() < 0:
        r, c = np.argwhere(table < 0)[0]
        raise DataError(f"{path}: negative entry {table[r, c]!r} at row {r}, column {c}")
    return table


def save_view_table(view, path) -> None:
    """Write a view in the mfeat layout: one sample per line, no header."""
    values = view.values if isinstance(view, ViewMatrix) else np.asarray(view)
    np.savetxt(path, values.T, fmt="%.17g")


def _block_labels(n_rows, block):
    return np.arange(n_rows) // block


def load_mfeat(fourier_path, pixel_path, *, n_rows=MFEAT_ROWS,
               class_size=MFEAT_CLASS_SIZE) -> MultiViewDataset:
    """Load the two-view UCI handwritten digits data (``mfeat-fou``, ``mfeat-pix``).

    The UCI files carry no label column; rows come in class blocks of 200,
    so the label of row ``r`` is ``r // 200``.

    Parameters
    ----------
    fourier_path, pixel_path : path-like
        The 76-column Fourier and 240-column pixel-average tables.
    n_rows, class_size : int
        Expected row count and class block size. Override only for
        synthetic files written in the same layout.
    """
    fou = load_view_table(fourier_path, n_rows=n_rows, n_cols=76)
    pix = load_view_table(pixel_path, n_rows=n_rows, n_cols=240)
    labels = _block_labels(n_rows, class_size)
    return MultiViewDataset((ViewMatrix(fou.T), ViewMatrix(pix.T)), labels,
                            name="digits")


def load_views(view_paths, labels_path=None, name="") -> MultiViewDataset:
    """Load any number of mfeat-layout tables as views, with optional labels.

    ``labels_path`` holds one integer label per line.
    """
    tables = [load_view_table(p) for p in view_paths]
    if not tables:
        raise DataError("no view files given")
    n = tables[0].shape[0]
    for p, t in zip(view_paths, tables):
        if t.shape[0] != n:
            raise DataError(f"{p}: expected {n} rows, found {t.shape[0]}")
    labels = None
    if labels_path is not None:
        labels = load_view_table(labels_path, n_rows=n, n_cols=1)[:, 0]
        if not np.all(labels == np.round(labels)):
            raise DataError(f"{labels_path}: labels must be integers")
    return MultiViewDataset(tuple(ViewMatrix(t.T) for t in tables), labels, name=name)


def normalize(view: ViewMatrix, mode: str) -> ViewMatrix:
    """Scale every column to unit L1 (``"l1_columns"``) or L2 (``"l2_columns"``) norm."""
    if mode not in ("l1_columns", "l2_columns"):
        raise DataError(f"unknown normalization mode {mode!r}")
    values = view.values
    if mode == "l1_columns":
        norms = values.sum(axis=0)
    else:
        norms = np.sqrt((values * values).sum(axis=0))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DataError(f"column {zero[0]} is entirely zero and cannot be normalized")
    return ViewMatrix(values / norms, norm_state=mode)


def normalize_dataset(dataset: MultiViewDataset, mode: str) -> MultiViewDataset:
    return dataset.with_views(normalize(v, mode) for v in dataset.views)


def concatenate(dataset: MultiViewDataset) -> ViewMatrix:
    """Stack the views row-wise into one ``(sum M_v, N)`` view."""
    if not dataset.views:
        raise DataError("cannot concatenate an empty dataset")
    states = {v.norm_state for v in dataset.views}
    state = states.pop() if len(states) == 1 else "raw"
    if dataset.n_views == 1:
        return dataset.views[0]
    return ViewMatrix(np.vstack([v.values for v in dataset.views]), norm_state=state)


def make_synthetic(n_clusters: int, samples_per_cluster: int, dims: Sequence[int],
                   noise: float = 0.0, seed: int = 0) -> MultiViewDataset:
    """Planted-partition multi-view data.

    Each view gets one uniform[0, 1) prototype column per cluster; every
    sample copies its cluster's prototype and adds uniform[0, noise) noise.
    Samples are ordered cluster by cluster.
    """
    if n_clusters < 1 or samples_per_cluster < 1 or not dims or min(dims) < 1:
        raise DataError("n_clusters, samples_per_cluster and every dim must be >= 1")
    if noise < 0:
        raise DataError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_clusters), samples_per_cluster)
    views = []
    for m in dims:
        prototypes = rng.uniform(0.0, 1.0, size=(m, n_clusters))
        # keep every prototype column away from zero so normalization is defined
        prototypes[rng.integers(m, size=n_clusters), np.arange(n_clusters)] += 1.0
        values = prototypes[:, labels]
        if noise > 0:
            values = values + noise * rng.uniform(0.0, 1.0, size=values.shape)
        views.append(ViewMatrix(values))
    return MultiViewDataset(tuple(views), labels, name="synthetic")
