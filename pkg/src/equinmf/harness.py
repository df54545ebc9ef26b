"""Experiment protocol: normalize, build graphs, factorize, cluster, score.

A run of method ``m`` with index ``r`` is reported under seed
``master_seed + r``. Its random streams are seeded from the tuple
``(master_seed + r, code(m), purpose)``, so different methods never share a
stream while a given (method, run) pair is reproducible on its own.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dataviews import (
    DataError,
    MultiViewDataset,
    concatenate,
    load_mfeat,
    load_views,
    make_synthetic,
    normalize_dataset,
)
from .evaluation import EvalReport, accuracy, kmeans, nmi, welch_ttest
from .factorize import SolverOptions, equinmf, gnmf, multinmf, nmf
from .graph import SimilarityGraph, combine_graphs, knn_graph
from .heuristics import HeuristicReport, heuristic_params

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "ExperimentResult",
    "load_config",
    "load_dataset",
    "run_experiment",
    "run_sweep",
    "emit_results",
    "write_sweep",
    "read_runs_csv",
    "METHODS",
    "DEFAULT_MULTIPLIERS",
]

log = logging.getLogger(__name__)

METHODS = ("kmeans", "nmf", "gnmf", "multinmf", "equinmf")
METHOD_CODES = {m: i for i, m in enumerate(METHODS)}
REQUIRED_NORMALIZATION = {
    "kmeans": "l2_columns",
    "nmf": "l2_columns",
    "gnmf": "l2_columns",
    "multinmf": "l1_columns",
    "equinmf": "l1_columns",
}
DEFAULT_MULTIPLIERS = (0.0, 0.25, 0.5, 1.0, 2.0)
CSV_HEADER = ("method", "seed", "accuracy", "nmi", "objective", "iterations", "wall_ms")
SWEEP_HEADER = ("multiplier", "acc_mean", "acc_std", "nmi_mean", "nmi_std")
SUMMARY_HEADER = ("method", "dataset", "metric", "mean", "std")

_SOLVER_STREAM = 0
_KMEANS_STREAM = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    The dataset is either the two mfeat files, a list of view files in the
    same layout (``view_paths`` plus optional ``labels_path``), or a
    synthetic planted partition (``synthetic=True``).
    """

    fourier_path: Optional[str] = None
    pixel_path: Optional[str] = None
    view_paths: tuple = ()
    labels_path: Optional[str] = None
    synthetic: bool = False
    synthetic_clusters: int = 3
    synthetic_samples: int = 20
    synthetic_dims: tuple = (20, 30)
    synthetic_noise: float = 0.0
    synthetic_seed: int = 0

    methods: tuple = METHODS
    k_clusters: Optional[int] = None
    runs: int = 20
    knn_k: int = 5
    seed: int = 0
    workers: int = 1
    max_iter: int = 300
    tol: float = 1e-6
    inner_iter: int = 50
    kmeans_repeats: int = 20
    kmeans_iters: int = 100
    gnmf_gamma: float = 100.0
    multinmf_lambda: float = 0.01
    multinmf_rounds: int = 30
    equinmf_gamma_multiplier: float = 1.0
    normalization: tuple = ()
    record_wall_time: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.methods:
            raise ConfigError("method list is empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be >= 1")
        for spec in self.normalization:
            method, _, mode = spec.partition("=")
            if method not in METHODS:
                raise ConfigError(f"normalization given for unknown method {method!r}")
            if mode != REQUIRED_NORMALIZATION[method]:
                raise ConfigError(
                    f"{method} runs on {REQUIRED_NORMALIZATION[method]} data, not {mode!r}"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# config keys as written in files / on the command line -> field names
CONFIG_KEYS = {
    "dataset.fourier_path": "fourier_path",
    "dataset.pixel_path": "pixel_path",
    "dataset.view_paths": "view_paths",
    "dataset.labels_path": "labels_path",
    "dataset.synthetic": "synthetic",
    "dataset.n_clusters": "synthetic_clusters",
    "dataset.samples_per_cluster": "synthetic_samples",
    "dataset.dims": "synthetic_dims",
    "dataset.noise": "synthetic_noise",
    "dataset.seed": "synthetic_seed",
    "methods": "methods",
    "k_clusters": "k_clusters",
    "runs": "runs",
    "knn_k": "knn_k",
    "seed": "seed",
    "workers": "workers",
    "max_iter": "max_iter",
    "tol": "tol",
    "inner_iter": "inner_iter",
    "kmeans.repeats": "kmeans_repeats",
    "kmeans.iters": "kmeans_iters",
    "gnmf.gamma": "gnmf_gamma",
    "multinmf.lambda": "multinmf_lambda",
    "multinmf.rounds": "multinmf_rounds",
    "equinmf.gamma_multiplier": "equinmf_gamma_multiplier",
    "normalization": "normalization",
    "record_wall_time": "record_wall_time",
}
_TOP_SECTION = "experiment"


def _coerce(name, raw):
    """Convert a config string to the type of field ``name``."""
    default = {f.name: f.default for f in fields(ExperimentConfig)}[name]
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    raw = raw.strip()
    try:
        if name in ("methods", "view_paths", "normalization"):
            return tuple(x.strip() for x in raw.replace(",", " ").split() if x.strip())
        if name == "synthetic_dims":
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if name == "k_clusters" or isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw or None
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {name}") from exc


def config_from_mapping(mapping: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Apply ``{"dataset.fourier_path": ..., "runs": "20", ...}`` on top of ``base``."""
    updates = {}
    for key, raw in mapping.items():
        if raw is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        updates[CONFIG_KEYS[key]] = _coerce(CONFIG_KEYS[key], raw)
    try:
        return replace(base or ExperimentConfig(), **updates)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read an INI-style config; ``[experiment]`` holds the undotted keys.

    Keys in any other section ``[s]`` are addressed as ``s.key``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[key if section == _TOP_SECTION else f"{section}.{key}"] = value
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(flat)


def load_dataset(config: ExperimentConfig) -> MultiViewDataset:
    if config.synthetic:
        return make_synthetic(config.synthetic_clusters, config.synthetic_samples,
                              config.synthetic_dims, config.synthetic_noise,
                              config.synthetic_seed)
    if config.view_paths:
        return load_views(config.view_paths, config.labels_path)
    if config.fourier_path and config.pixel_path:
        return load_mfeat(config.fourier_path, config.pixel_path)
    raise ConfigError("no dataset configured (mfeat paths, view_paths or synthetic)")


@dataclass(frozen=True)
class RunRecord:
    method: str
    seed: int
    accuracy: float
    nmi: float
    objective: float
    iterations: int
    wall_ms: Optional[float] = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[RunRecord]
    reports: Dict[str, EvalReport]
    heuristic: Optional[HeuristicReport] = None
    dataset_name: str = ""

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "dataset": self.dataset_name,
            "heuristic": self.heuristic.to_dict() if self.heuristic else None,
            "reports": {m: r.to_dict() for m, r in self.reports.items()},
        }


@dataclass
class _Prepared:
    """Normalized data and graphs, built once and shared by every run."""

    labels: np.ndarray
    K: int
    concat_l2: Optional[np.ndarray] = None
    multi_l1: Optional[MultiViewDataset] = None
    concat_graph: Optional[SimilarityGraph] = None
    view_graph: Optional[SimilarityGraph] = None
    heuristic: Optional[HeuristicReport] = None
    equi_params: object = None


def _prepare(config: ExperimentConfig, dataset: MultiViewDataset, methods) -> _Prepared:
    if dataset.labels is None:
        raise DataError("dataset has no ground-truth labels to score against")
    K = config.k_clusters or dataset.n_classes
    prep = _Prepared(dataset.labels, K)
    if {"kmeans", "nmf", "gnmf"} & set(methods):
        prep.concat_l2 = concatenate(normalize_dataset(dataset, "l2_columns")).values
    if "gnmf" in methods:
        prep.concat_graph = knn_graph(prep.concat_l2, config.knn_k)
    if {"multinmf", "equinmf"} & set(methods):
        prep.multi_l1 = normalize_dataset(dataset, "l1_columns")
    if "equinmf" in methods:
        prep.view_graph = combine_graphs(knn_graph(v, config.knn_k) for v in prep.multi_l1.views)
        prep.equi_params, prep.heuristic = heuristic_params(
            prep.multi_l1, prep.view_graph, K, config.equinmf_gamma_multiplier)
    return prep


def _streams(run_seed, method):
    code = METHOD_CODES[method]
    return (run_seed, code, _SOLVER_STREAM), (run_seed, code, _KMEANS_STREAM)


def _one_run(config: ExperimentConfig, prep: _Prepared, method: str, run_index: int) -> RunRecord:
    run_seed = config.seed + run_index
    solver_seed, km_seed = _streams(run_seed, method)
    opts = SolverOptions(K=prep.K, max_iter=config.max_iter, tol=config.tol,
                         seed=solver_seed, inner_iter=config.inner_iter)
    start = time.perf_counter()
    try:
        if method == "kmeans":
            cl = kmeans(prep.concat_l2.T, prep.K, config.kmeans_repeats,
                        config.kmeans_iters, km_seed)
            objective, iterations = cl.sse, len(cl.sse_history)
        else:
            if method == "nmf":
                res = nmf(prep.concat_l2, opts)
            elif method == "gnmf":
                res = gnmf(prep.concat_l2, prep.concat_graph, config.gnmf_gamma, opts)
            elif method == "multinmf":
                lam = [config.multinmf_lambda] * prep.multi_l1.n_views
                res = multinmf(prep.multi_l1, lam, replace(opts, max_iter=config.multinmf_rounds))
            else:
                res = equinmf(prep.multi_l1, prep.view_graph, prep.equi_params, opts)
            cl = kmeans(res.V, prep.K, config.kmeans_repeats, config.kmeans_iters, km_seed)
            objective, iterations = res.final_objective, res.iterations_run
    except (DataError, ArithmeticError) as exc:
        raise type(exc)(f"{method} run {run_index} (seed {run_seed}): {exc}") from exc
    wall = (time.perf_counter() - start) * 1000.0
    return RunRecord(method, run_seed, accuracy(cl.labels, prep.labels),
                     nmi(cl.labels, prep.labels), float(objective), int(iterations),
                     wall if config.record_wall_time else None)


def _run_all(config, prep, jobs) -> List[RunRecord]:
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_one_run, config, prep, m, r) for m, r in jobs]
            records = [f.result() for f in futures]
    else:
        records = [_one_run(config, prep, m, r) for m, r in jobs]
    return sorted(records, key=lambda rec: (METHOD_CODES[rec.method], rec.seed))


def _reports(records, methods, alpha=0.05) -> Dict[str, EvalReport]:
    reports = {}
    for m in methods:
        rows = [r for r in records if r.method == m]
        reports[m] = EvalReport(m, [r.accuracy for r in rows], [r.nmi for r in rows])
    for a in methods:
        for b in methods:
            if a == b or len(reports[a].accuracy) < 2:
                continue
            sig = {}
            for metric in ("accuracy", "nmi"):
                res = welch_ttest(getattr(reports[a], metric), getattr(reports[b], metric), alpha)
                sig[metric] = {"t": res.t, "p": res.p, "significant": res.significant}
            reports[a].significance[b] = sig
    return reports


def run_experiment(config: ExperimentConfig, dataset: Optional[MultiViewDataset] = None) -> ExperimentResult:
    """Run every configured method ``config.runs`` times and score it."""
    dataset = load_dataset(config) if dataset is None else dataset
    methods = [m for m in METHODS if m in config.methods]
    prep = _prepare(config, dataset, methods)
    jobs = [(m, r) for m in methods for r in range(config.runs)]
    records = _run_all(config, prep, jobs)
    return ExperimentResult(config, records, _reports(records, methods), prep.heuristic,
                            dataset.name or "")


def run_sweep(config: ExperimentConfig, multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
              dataset: Optional[MultiViewDataset] = None):
    """EquiNMF accuracy/NMI as the heuristic graph weight is scaled.

    Returns ``(rows, results)``: one ``(multiplier, acc_mean, acc_std,
    nmi_mean, nmi_std)`` tuple per multiplier and the underlying
    :class:`ExperimentResult` objects.
    """
    if "equinmf" not in config.methods:
        raise ConfigError("sweep needs equinmf in the method list")
    dataset = load_dataset(config) if dataset is None else dataset
    rows, results = [], []
    for m in multipliers:
        if m < 0:
            raise ConfigError("multipliers must be >= 0")
        sub = replace(config, methods=("equinmf",), equinmf_gamma_multiplier=float(m))
        res = run_experiment(sub, dataset)
        rep = res.reports["equinmf"]
        rows.append((float(m), rep.accuracy_mean, rep.accuracy_std, rep.nmi_mean, rep.nmi_std))
        results.append(res)
    return rows, results


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def runs_csv_text(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def summary_csv_text(result: "ExperimentResult") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for rep in result.reports.values():
        for row in rep.csv_rows(result.dataset_name):
            writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_runs_csv(path) -> List[RunRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RunRecord(row["method"], int(row["seed"]), float(row["accuracy"]), float(row["nmi"]),
                  float(row["objective"]), int(row["iterations"]),
                  float(row["wall_ms"]) if row["wall_ms"] else None)
        for row in rows
    ]


def emit_results(result: ExperimentResult, outdir, fmt: str = "both") -> List[Path]:
    """Write ``runs.csv`` + ``summary.csv`` and/or ``summary.json`` under ``outdir``.

    Numbers are rendered with 17 significant digits and keys are sorted, so
    identical inputs give identical bytes. Wall times appear only when the
    config asks for them.
    """
    if fmt not in ("csv", "structured", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {outdir}: {exc}") from exc
    written = []
    if fmt in ("csv", "both"):
        path = outdir / "runs.csv"
        path.write_text(runs_csv_text(result.records))
        written.append(path)
        path = outdir / "summary.csv"
        path.write_text(summary_csv_text(result))
        written.append(path)
    if fmt in ("structured", "both"):
        path = outdir / "summary.json"
        path.write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def write_sweep(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path
