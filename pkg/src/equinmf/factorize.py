"""Multiplicative-update solvers: NMF, GNMF, MultiNMF and EquiNMF.

Every solver returns a :class:`FactorizationResult` whose
``objective_trace[0]`` is the objective at the starting factors and whose
``objective_trace[t]`` is the value after iteration ``t``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .dataviews import DataError, MultiViewDataset, ViewMatrix
from .graph import SimilarityGraph
from .objectives import (
    equinmf_objective,
    gnmf_objective,
    multinmf_objective,
    nmf_objective,
)

__all__ = [
    "SolverDivergence",
    "SolverOptions",
    "FactorizationResult",
    "EquiParams",
    "init_factors",
    "nmf",
    "gnmf",
    "multinmf",
    "equinmf",
    "nmf_step",
    "gnmf_step",
    "multinmf_view_step",
    "equinmf_step",
    "dump_result",
    "load_result",
]

log = logging.getLogger(__name__)

WARMUP_CYCLES = 50


class SolverDivergence(ArithmeticError):
    """A factor picked up NaN or Inf entries."""


@dataclass(frozen=True)
class SolverOptions:
    K: int
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0
    eps: float = 1e-12
    inner_iter: int = 50

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.max_iter < 1 or self.inner_iter < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


@dataclass
class FactorizationResult:
    """Factors and convergence record of one solver run.

    ``V`` is the shared coefficient matrix (the consensus ``V*`` for
    MultiNMF, whose per-view coefficients live in ``V_views``).
    """

    U_views: List[np.ndarray]
    V: np.ndarray
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations_run: int = 0
    converged: bool = False
    V_views: Optional[List[np.ndarray]] = None
    method: str = ""
    seed: int = 0

    @property
    def final_objective(self) -> float:
        return float(self.objective_trace[-1]) if len(self.objective_trace) else float("nan")


@dataclass(frozen=True)
class EquiParams:
    """View weights ``alpha`` and graph weight ``gamma`` for EquiNMF.

    The solver uses ``gamma * gamma_multiplier``.
    """

    alpha: tuple
    gamma: float = 0.0
    gamma_multiplier: float = 1.0

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if not alpha or min(alpha) <= 0:
            raise ValueError("every alpha must be > 0")
        if self.gamma < 0 or self.gamma_multiplier < 0:
            raise ValueError("gamma and gamma_multiplier must be >= 0")
        object.__setattr__(self, "alpha", alpha)

    @property
    def effective_gamma(self) -> float:
        return float(self.gamma * self.gamma_multiplier)


def _values(view) -> np.ndarray:
    return view.values if isinstance(view, ViewMatrix) else np.asarray(view, dtype=np.float64)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise SolverDivergence("non-finite entries in factors")


def _col_normalize(U):
    s = U.sum(axis=0)
    return U / np.where(s > 0, s, 1.0)


def _rel_change(prev, cur):
    return abs(prev - cur) / max(abs(prev), np.finfo(float).tiny)


# -- single update steps -----------------------------------------------------

def nmf_step(X, U, V, eps=1e-12):
    """One Lee-Seung sweep for ``||X - U V^T||^2``: U first, then V."""
    U = U * (X @ V) / (U @ (V.T @ V) + eps)
    V = V * (X.T @ U) / (V @ (U.T @ U) + eps)
    return U, V


def gnmf_step(X, U, V, graph, gamma, eps=1e-12):
    U = U * (X @ V) / (U @ (V.T @ V) + eps)
    num = X.T @ U
    den = V @ (U.T @ U)
    if gamma:
        num = num + gamma * (graph.sparse_weights @ V)
        den = den + gamma * (graph.degree[:, None] * V)
    V = V * num / (den + eps)
    return U, V


def multinmf_view_step(X, U, V, V_star, lam, eps=1e-12):
    """One sweep on a single view of the consensus-regularized problem.

    Minimizes ``||X - U V^T||^2 + lam ||V Q - V*||^2`` where ``Q`` holds
    the column sums of ``U``. After the U update the pair is rescaled so
    that ``U`` has unit column sums, which makes ``Q = I`` for the V update.
    """
    VtV = V.T @ V
    num = X @ V + lam * (V * V_star).sum(axis=0)
    den = U @ VtV + lam * U.sum(axis=0) * (V * V).sum(axis=0)
    U = U * num / (den + eps)
    q = U.sum(axis=0)
    q = np.where(q > 0, q, 1.0)
    U = U / q
    V = V * q
    V = V * (X.T @ U + lam * V_star) / (V @ (U.T @ U) + lam * V + eps)
    return U, V


def equinmf_step(Xs, Us, V, alpha, graph, gamma, eps=1e-12):
    """One EquiNMF sweep: every basis (normalize, update, normalize), then V."""
    new_Us = []
    for X, U in zip(Xs, Us):
        U = _col_normalize(U)
        XV = X @ V
        A = U @ (V.T @ V)
        num = XV + (A * U).sum(axis=0)
        den = A + (XV * U).sum(axis=0)
        U = _col_normalize(U * num / (den + eps))
        new_Us.append(U)
    num = np.zeros_like(V)
    den = np.zeros_like(V)
    for X, U, a in zip(Xs, new_Us, alpha):
        num += a * (X.T @ U)
        den += a * (V @ (U.T @ U))
    if gamma:
        num += gamma * (graph.sparse_weights @ V)
        den += gamma * (graph.degree[:, None] * V)
    V = V * num / (den + eps)
    return new_Us, V


# -- initialization ----------------------------------------------------------

def init_factors(dataset: MultiViewDataset, K: int, seed: int = 0,
                 warmup_cycles: int = WARMUP_CYCLES, eps: float = 1e-12) -> FactorizationResult:
    """Random start shared by the multi-view solvers.

    Draws ``U_v`` and ``V`` from uniform[0, 1), scales ``U_v`` columns and
    ``V`` rows to sum to one, then cycles over the views ``warmup_cycles``
    times applying one plain NMF sweep of ``(U_v, V)`` against ``X_v``.
    """
    rng = np.random.default_rng(seed)
    Xs = [v.values for v in dataset.views]
    n = dataset.n_samples
    Us = [_col_normalize(rng.uniform(size=(X.shape[0], K))) for X in Xs]
    V = rng.uniform(size=(n, K))
    V = V / V.sum(axis=1, keepdims=True)
    for _ in range(warmup_cycles):
        for v, X in enumerate(Xs):
            Us[v], V = nmf_step(X, Us[v], V, eps)
    _check_finite(V, *Us)
    return FactorizationResult(Us, V, method="init", seed=seed)


def _random_pair(rng, M, N, K):
    return rng.uniform(size=(M, K)), rng.uniform(size=(N, K))


# -- solvers -----------------------------------------------------------------

def _iterate(step, objective, state, opts: SolverOptions, max_iter=None):
    """Run ``state = step(state)`` until the objective settles.

    Returns the final state, the objective trace, and the converged flag.
    """
    max_iter = opts.max_iter if max_iter is None else max_iter
    trace = [objective(state)]
    converged = False
    for _ in range(max_iter):
        state = step(state)
        trace.append(objective(state))
        if not np.isfinite(trace[-1]):
            raise SolverDivergence("objective became non-finite")
        if _rel_change(trace[-2], trace[-1]) < opts.tol:
            converged = True
            break
    return state, np.asarray(trace), converged


def nmf(X, opts: SolverOptions, U0=None, V0=None) -> FactorizationResult:
    """Plain NMF by multiplicative updates, random uniform start unless given."""
    return gnmf(X, None, 0.0, opts, U0=U0, V0=V0, _method="nmf")


def gnmf(X, graph: Optional[SimilarityGraph], gamma: float, opts: SolverOptions,
         U0=None, V0=None, _method="gnmf") -> FactorizationResult:
    """Graph-regularized NMF, ``||X - U V^T||^2 + gamma Tr(V^T L V)``."""
    X = _values(X)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if gamma and graph is None:
        raise DataError("gamma > 0 needs a graph")
    if graph is not None and graph.n_nodes != X.shape[1]:
        raise DataError(f"graph has {graph.n_nodes} nodes, X has {X.shape[1]} samples")
    if U0 is None or V0 is None:
        U, V = _random_pair(np.random.default_rng(opts.seed), X.shape[0], X.shape[1], opts.K)
    else:
        U, V = np.array(U0, dtype=np.float64), np.array(V0, dtype=np.float64)

    def step(state):
        U, V = gnmf_step(X, *state, graph, gamma, opts.eps)
        _check_finite(U, V)
        return U, V

    def objective(state):
        return gnmf_objective(X, state[0], state[1], graph, gamma)

    (U, V), trace, converged = _iterate(step, objective, (U, V), opts)
    return FactorizationResult([U], V, trace, len(trace) - 1, converged,
                               method=_method, seed=opts.seed)


def _consensus(Vs, Us, lam):
    scaled = [V * U.sum(axis=0) for U, V in zip(Us, Vs)]
    weights = np.asarray(lam, dtype=np.float64)
    if weights.sum() <= 0:
        weights = np.ones_like(weights)
    return sum(w * s for w, s in zip(weights, scaled)) / weights.sum()


def _chained_warm_start(Xs, opts, rounds):
    """Plain NMF per view, each view starting from the previous view's V.

    Chaining keeps column ``k`` of every ``V_v`` on the same component, which
    a small consensus weight cannot enforce by itself.
    """
    rng = np.random.default_rng(opts.seed)
    n = Xs[0].shape[1]
    Us = [rng.uniform(size=(X.shape[0], opts.K)) for X in Xs]
    V = rng.uniform(size=(n, opts.K))
    Vs = [None] * len(Xs)
    for _ in range(rounds):
        for v, X in enumerate(Xs):
            U = Us[v]
            for _ in range(opts.inner_iter):
                U, V = nmf_step(X, U, V, opts.eps)
            q = U.sum(axis=0)
            q = np.where(q > 0, q, 1.0)
            Us[v], V = U / q, V * q
            Vs[v] = V
    return Us, [V.copy() for V in Vs]


def multinmf(dataset: MultiViewDataset, lam: Sequence[float], opts: SolverOptions,
             U0=None, V0=None, warm_rounds: int = 3) -> FactorizationResult:
    """Consensus-regularized multi-view NMF by block coordinate descent.

    The warm start fits each view by plain NMF (``inner_iter`` sweeps),
    passing ``V`` from view to view for ``warm_rounds`` rounds. Every outer iteration then runs up to ``inner_iter``
    sweeps of :func:`multinmf_view_step` per view and resets ``V*`` to the
    ``lam``-weighted mean of the ``V_v Q_v``, its exact minimizer.

    ``U0`` and ``V0`` (lists, one entry per view) skip the warm start.
    """
    Xs = [v.values for v in dataset.views]
    lam = [float(l) for l in lam]
    if len(lam) != len(Xs):
        raise DataError(f"{len(lam)} lambda values for {len(Xs)} views")
    if min(lam) < 0:
        raise ValueError("lambda must be >= 0")
    if U0 is None or V0 is None:
        Us, Vs = _chained_warm_start(Xs, opts, warm_rounds)
    else:
        Us = [np.array(U, dtype=np.float64) for U in U0]
        Vs = [np.array(V, dtype=np.float64) for V in V0]
    for v in range(len(Xs)):
        q = Us[v].sum(axis=0)
        q = np.where(q > 0, q, 1.0)
        Us[v], Vs[v] = Us[v] / q, Vs[v] * q
    V_star = _consensus(Vs, Us, lam)
    _check_finite(V_star, *Us, *Vs)

    def objective(state):
        Us, Vs, V_star = state
        return multinmf_objective(Xs, Us, Vs, V_star, lam)

    def step(state):
        Us, Vs, V_star = list(state[0]), list(state[1]), state[2]
        for v, X in enumerate(Xs):
            U, V = Us[v], Vs[v]
            prev = None
            for _ in range(opts.inner_iter):
                U, V = multinmf_view_step(X, U, V, V_star, lam[v], opts.eps)
                cur = multinmf_objective([X], [U], [V], V_star, [lam[v]])
                if prev is not None and _rel_change(prev, cur) < opts.tol:
                    break
                prev = cur
            _check_finite(U, V)
            Us[v], Vs[v] = U, V
        return Us, Vs, _consensus(Vs, Us, lam)

    (Us, Vs, V_star), trace, converged = _iterate(step, objective, (Us, Vs, V_star), opts)
    return FactorizationResult(Us, V_star, trace, len(trace) - 1, converged,
                               V_views=Vs, method="multinmf", seed=opts.seed)


def equinmf(dataset: MultiViewDataset, graph: Optional[SimilarityGraph],
            params: EquiParams, opts: SolverOptions, init=None) -> FactorizationResult:
    """Graph-regularized multi-view NMF with one shared coefficient matrix.

    Minimizes ``sum_v alpha_v ||X_v - U_v C_v V^T||^2 + gamma Tr(V^T L V)``
    where ``C_v`` rescales the columns of ``U_v`` to unit sum. The bases
    are kept column-normalized so ``C_v = I`` inside the updates.

    Parameters
    ----------
    dataset : MultiViewDataset
        Views with unit L1 column norms.
    graph : SimilarityGraph or None
        Sample graph; may be None only when the effective gamma is 0.
    params : EquiParams
    opts : SolverOptions
    init : FactorizationResult, optional
        Starting factors; defaults to ``init_factors(dataset, K, seed)``.
    """
    Xs = [v.values for v in dataset.views]
    alpha = params.alpha
    gamma = params.effective_gamma
    if len(alpha) != len(Xs):
        raise DataError(f"{len(alpha)} alpha values for {len(Xs)} views")
    if gamma and graph is None:
        raise DataError("gamma > 0 needs a graph")
    if graph is not None and graph.n_nodes != dataset.n_samples:
        raise DataError(
            f"graph has {graph.n_nodes} nodes, dataset has {dataset.n_samples} samples"
        )
    if init is None:
        init = init_factors(dataset, opts.K, opts.seed, eps=opts.eps)
    Us = [np.array(U, dtype=np.float64) for U in init.U_views]
    V = np.array(init.V, dtype=np.float64)

    def step(state):
        Us, V = equinmf_step(Xs, state[0], state[1], alpha, graph, gamma, opts.eps)
        _check_finite(V, *Us)
        return Us, V

    def objective(state):
        return equinmf_objective(Xs, state[0], state[1], alpha, graph, gamma)

    (Us, V), trace, converged = _iterate(step, objective, (Us, V), opts)
    return FactorizationResult(Us, V, trace, len(trace) - 1, converged,
                               method="equinmf", seed=opts.seed)


# -- serialization -----------------------------------------------------------

def dump_result(result: FactorizationResult, path) -> None:
    """Write factors as CSV blocks preceded by one JSON metadata line.

    Layout::

        # meta {"method": ..., "seed": ..., ...}
        # matrix U0 rows cols
        <rows of comma-separated values>
        ...
    """
    meta = {
        "method": result.method,
        "seed": int(result.seed),
        "iterations": int(result.iterations_run),
        "converged": bool(result.converged),
        "final_objective": result.final_objective,
        "objective_trace": [float(x) for x in result.objective_trace],
    }
    blocks = [(f"U{v}", U) for v, U in enumerate(result.U_views)]
    blocks.append(("V", result.V))
    if result.V_views is not None:
        blocks += [(f"Vview{v}", V) for v, V in enumerate(result.V_views)]
    with open(path, "w") as fh:
        fh.write("# meta " + json.dumps(meta, sort_keys=True) + "\n")
        for name, M in blocks:
            fh.write(f"# matrix {name} {M.shape[0]} {M.shape[1]}\n")
            for row in M:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_result(path) -> FactorizationResult:
    meta = None
    mats = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("# meta "):
            meta = json.loads(line[len("# meta "):])
            i += 1
        elif line.startswith("# matrix "):
            _, _, name, r, c = line.split()
            r, c = int(r), int(c)
            rows = [[float(x) for x in ln.split(",")] for ln in lines[i + 1:i + 1 + r]]
            mats[name] = np.array(rows, dtype=np.float64).reshape(r, c)
            i += 1 + r
        else:
            raise DataError(f"{path}: unexpected line {i + 1}")
    if meta is None or "V" not in mats:
        raise DataError(f"{path}: missing metadata or V block")
    n_u = sum(1 for k in mats if k.startswith("U"))
    n_vv = sum(1 for k in mats if k.startswith("Vview"))
    return FactorizationResult(
        U_views=[mats[f"U{v}"] for v in range(n_u)],
        V=mats["V"],
        objective_trace=np.asarray(meta["objective_trace"], dtype=np.float64),
        iterations_run=meta["iterations"],
        converged=meta["converged"],
        V_views=[mats[f"Vview{v}"] for v in range(n_vv)] if n_vv else None,
        method=meta["method"],
        seed=meta["seed"],
    )
