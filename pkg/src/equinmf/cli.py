"""Command-line entry point: ``equinmf {cluster,sweep,datagen,check}``.

Exit codes: 0 success, 1 config error, 2 data error, 3 solver divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataviews import DataError, make_synthetic, normalize_dataset, save_view_table
from .factorize import SolverDivergence, SolverOptions, equinmf, init_factors
from .graph import combine_graphs, knn_graph, mean_weight
from .harness import (
    CONFIG_KEYS,
    DEFAULT_MULTIPLIERS,
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    emit_results,
    load_config,
    load_dataset,
    run_experiment,
    run_sweep,
    write_sweep,
)
from .heuristics import HeuristicError, expected_contribution_check, heuristic_params
from .objectives import equinmf_gradient_V, equinmf_objective

log = logging.getLogger("equinmf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


def _add_config_flags(p):
    p.add_argument("--config", help="INI config file")
    for key in CONFIG_KEYS:
        p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")


def _config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
    if args.config:
        return load_config(args.config, overrides)
    return config_from_mapping(overrides)


def _cmd_cluster(args):
    config = _config(args)
    result = run_experiment(config)
    for path in emit_results(result, args.out, args.format):
        log.info("wrote %s", path)
    for method, rep in result.reports.items():
        print(f"{method:9s} acc {rep.accuracy_mean:.3f} +- {rep.accuracy_std:.3f}   "
              f"nmi {rep.nmi_mean:.3f} +- {rep.nmi_std:.3f}")


def _cmd_sweep(args):
    config = _config(args)
    if "equinmf" not in config.methods:
        config = replace(config, methods=("equinmf",))
    multipliers = [float(m) for m in args.multipliers.split(",")] if args.multipliers else DEFAULT_MULTIPLIERS
    rows, _ = run_sweep(config, multipliers)
    path = write_sweep(rows, Path(args.out) / "sweep.csv")
    log.info("wrote %s", path)
    for row in rows:
        print("m={:<5g} acc {:.3f} +- {:.3f}   nmi {:.3f} +- {:.3f}".format(*row))


def _cmd_datagen(args):
    dims = [int(d) for d in args.dims.split(",")]
    ds = make_synthetic(args.clusters, args.samples, dims, args.noise, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v, view in enumerate(ds.views):
        save_view_table(view, out / f"view{v}.txt")
    np.savetxt(out / "labels.txt", ds.labels, fmt="%d")
    print(f"wrote {ds.n_views} views of {ds.n_samples} samples to {out}")


def _cmd_check(args):
    """Invariant and diagnostic report for the configured dataset."""
    config = _config(args)
    dataset = normalize_dataset(load_dataset(config), "l1_columns")
    K = config.k_clusters or dataset.n_classes or 2
    graphs = [knn_graph(v, config.knn_k) for v in dataset.views]
    graph = combine_graphs(graphs)
    L = graph.laplacian()
    x = np.random.default_rng(config.seed).standard_normal(graph.n_nodes)
    quad = float(x @ L @ x)
    pairwise = 0.5 * float((graph.W * (x[:, None] - x[None, :]) ** 2).sum())
    params, report = heuristic_params(dataset, graph, K)
    init = init_factors(dataset, K, config.seed)
    contrib = expected_contribution_check(dataset, init, params.alpha, params.gamma, graph)

    Xs = [v.values for v in dataset.views]
    Us = [U / U.sum(axis=0) for U in init.U_views]
    V = init.V
    grad = equinmf_gradient_V(Xs, Us, V, params.alpha, graph, params.gamma)
    j, k = np.unravel_index(np.argmax(np.abs(grad)), grad.shape)
    h = 1e-6 * max(abs(V[j, k]), 1e-3)
    Vp, Vm = V.copy(), V.copy()
    Vp[j, k] += h
    Vm[j, k] -= h
    fd = (equinmf_objective(Xs, Us, Vp, params.alpha, graph, params.gamma)
          - equinmf_objective(Xs, Us, Vm, params.alpha, graph, params.gamma)) / (2 * h)

    short = equinmf(dataset, graph, params, SolverOptions(K=K, max_iter=20, seed=config.seed), init=init)
    out = {
        "graph": {
            "symmetric": bool(np.array_equal(graph.W, graph.W.T)),
            "max_laplacian_row_sum": float(np.abs(L.sum(axis=1)).max()),
            "quadratic_form_gap": abs(quad - pairwise),
            "weight_values": sorted({float(w) for w in np.unique(graph.W)}),
            "mean_weight": mean_weight(graph),
        },
        "heuristic": report.to_dict(),
        "expected_contribution": contrib,
        "gradient_check": {"entry": [int(j), int(k)], "analytic": float(grad[j, k]), "finite_difference": fd},
        "descent": {"initial": float(short.objective_trace[0]), "after_20": short.final_objective},
    }
    print(json.dumps(out, indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equinmf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="run every configured method and score it")
    _add_config_flags(p)
    p.add_argument("--out", default="results")
    p.add_argument("--format", choices=("csv", "structured", "both"), default="both")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("sweep", help="EquiNMF accuracy against graph-weight multiplier")
    _add_config_flags(p)
    p.add_argument("--out", default="results")
    p.add_argument("--multipliers", help="comma-separated, default 0,0.25,0.5,1,2")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("datagen", help="write a synthetic planted-partition dataset")
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--samples", type=int, default=50, help="samples per cluster")
    p.add_argument("--dims", default="20,30", help="comma-separated feature counts per view")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synthetic")
    p.set_defaults(func=_cmd_datagen)

    p = sub.add_parser("check", help="graph, heuristic and gradient diagnostics")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, HeuristicError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverDivergence as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
