"""Objective functions of the four factorization models and EquiNMF gradients.

All functions take raw arrays: views ``X`` are ``(M, N)``, bases ``U`` are
``(M, K)`` and coefficients ``V`` are ``(N, K)``.
"""

from __future__ import annotations

import numpy as np

from .dataviews import DataError

__all__ = [
    "nmf_objective",
    "gnmf_objective",
    "multinmf_objective",
    "equinmf_objective",
    "objective_value",
    "equinmf_gradient_U",
    "equinmf_gradient_V",
]


def _residual_sq(X, U, V):
    if X.shape != (U.shape[0], V.shape[0]) or U.shape[1] != V.shape[1]:
        raise DataError(
            f"inconsistent shapes X{X.shape}, U{U.shape}, V{V.shape}"
        )
    R = X - U @ V.T
    return float(np.einsum("ij,ij->", R, R))


def _graph_term(graph, V):
    if graph.n_nodes != V.shape[0]:
        raise DataError(f"graph has {graph.n_nodes} nodes but V has {V.shape[0]} rows")
    return graph.quadratic_form(V)


def _column_normalized(U):
    s = U.sum(axis=0)
    return U / np.where(s > 0, s, 1.0)


def nmf_objective(X, U, V) -> float:
    """``||X - U V^T||_F^2``."""
    return _residual_sq(X, U, V)


def gnmf_objective(X, U, V, graph, gamma) -> float:
    """``||X - U V^T||_F^2 + gamma Tr(V^T L V)``."""
    out = _residual_sq(X, U, V)
    if gamma:
        out += gamma * _graph_term(graph, V)
    return out


def multinmf_objective(Xs, Us, Vs, V_star, lam) -> float:
    """Per-view reconstruction plus ``lam_v ||V_v Q_v - V*||_F^2``.

    ``Q_v`` is the diagonal of column sums of ``U_v``.
    """
    total = 0.0
    for X, U, V, l in zip(Xs, Us, Vs, lam, strict=True):
        total += _residual_sq(X, U, V)
        if l:
            D = V * U.sum(axis=0) - V_star
            total += l * float(np.einsum("ij,ij->", D, D))
    return total


def equinmf_objective(Xs, Us, V, alpha, graph=None, gamma=0.0) -> float:
    """Weighted reconstruction with column-sum-normalized bases plus graph term.

    The normalizer ``C_v`` is recomputed from the current ``U_v``, so the
    value does not depend on the scale of the basis columns.
    """
    total = 0.0
    for X, U, a in zip(Xs, Us, alpha, strict=True):
        total += a * _residual_sq(X, _column_normalized(U), V)
    if gamma:
        total += gamma * _graph_term(graph, V)
    return total


def objective_value(variant, result, views, *, graph=None, gamma=0.0,
                    alpha=None, lam=None) -> float:
    """Evaluate the objective of ``variant`` at the factors held in ``result``.

    ``views`` is a sequence of ``(M_v, N)`` arrays (one array for the
    single-view variants).
    """
    Xs = [np.asarray(getattr(v, "values", v), dtype=np.float64) for v in views]
    if variant == "nmf":
        return nmf_objective(Xs[0], result.U_views[0], result.V)
    if variant == "gnmf":
        return gnmf_objective(Xs[0], result.U_views[0], result.V, graph, gamma)
    if variant == "multinmf":
        if lam is None:
            raise DataError("multinmf objective needs lam")
        return multinmf_objective(Xs, result.U_views, result.V_views, result.V, lam)
    if variant == "equinmf":
        if alpha is None:
            alpha = [1.0] * len(Xs)
        return equinmf_objective(Xs, result.U_views, result.V, alpha, graph, gamma)
    raise ValueError(f"unknown variant {variant!r}")


def equinmf_gradient_U(X, U, V, alpha=1.0) -> np.ndarray:
    """Gradient of ``alpha ||X - U C V^T||^2`` in ``U`` with ``C`` tied to ``U``.

    ``C = diag(1 / column sums of U)``, so rescaling a column of ``U`` leaves
    the value unchanged and the gradient is orthogonal to ``U``'s columns.
    """
    s = U.sum(axis=0)
    UC = U / s
    XV = X @ V
    A = UC @ (V.T @ V)
    G = A - XV
    return 2.0 * alpha / s * (G - (G * UC).sum(axis=0))


def equinmf_gradient_V(Xs, Us, V, alpha, graph=None, gamma=0.0) -> np.ndarray:
    """Gradient in ``V`` of the EquiNMF objective with ``C_v`` held at the identity."""
    grad = np.zeros_like(V)
    for X, U, a in zip(Xs, Us, alpha, strict=True):
        grad += 2.0 * a * (V @ (U.T @ U) - X.T @ U)
    if gamma:
        grad += 2.0 * gamma * (graph.laplacian() @ V)
    return grad
