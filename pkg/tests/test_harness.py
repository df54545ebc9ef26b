import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from equinmf import cli, harness
from equinmf.dataviews import DataError
from equinmf.evaluation import summarize
from equinmf.factorize import SolverDivergence
from equinmf.harness import (
    CONFIG_KEYS,
    CSV_HEADER,
    METHODS,
    SWEEP_HEADER,
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    emit_results,
    load_config,
    read_runs_csv,
    run_experiment,
    run_sweep,
)


def small_config(**kw):
    base = dict(synthetic=True, synthetic_clusters=3, synthetic_samples=10,
                synthetic_dims=(8, 12), synthetic_noise=0.05, runs=3,
                max_iter=40, kmeans_repeats=5, kmeans_iters=30, multinmf_rounds=5,
                inner_iter=10)
    base.update(kw)
    return ExperimentConfig(**base)


# ----------------------------------------------------------------- config


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[experiment]\nmethods = nmf, equinmf\nruns = 4\nseed = 7\nknn_k = 3\n"
        "[dataset]\nfourier_path = a.txt\npixel_path = b.txt\n"
        "[gnmf]\ngamma = 50\n[multinmf]\nlambda = 0.1\n[equinmf]\ngamma_multiplier = 0.5\n"
    )
    cfg = load_config(path)
    assert cfg.methods == ("nmf", "equinmf")
    assert (cfg.runs, cfg.seed, cfg.knn_k) == (4, 7, 3)
    assert cfg.fourier_path == "a.txt" and cfg.pixel_path == "b.txt"
    assert (cfg.gnmf_gamma, cfg.multinmf_lambda, cfg.equinmf_gamma_multiplier) == (50.0, 0.1, 0.5)

    cfg = load_config(path, {"runs": "2", "gnmf.gamma": "3", "seed": None})
    assert cfg.runs == 2 and cfg.gnmf_gamma == 3.0 and cfg.seed == 7


def test_documented_keys_are_all_flags():
    parser = cli.build_parser()
    args = parser.parse_args(["cluster"] + [a for k in CONFIG_KEYS for a in (f"--{k}", "1")])
    for key in ("dataset.fourier_path", "dataset.pixel_path", "methods", "k_clusters", "runs",
                "knn_k", "gnmf.gamma", "multinmf.lambda", "equinmf.gamma_multiplier", "seed",
                "workers"):
        assert getattr(args, key) == "1"


@pytest.mark.parametrize("mapping", [
    {"runs": "0"},
    {"methods": ""},
    {"methods": "nmf, spectral"},
    {"runs": "many"},
    {"no.such.key": "1"},
    {"normalization": "equinmf=l2_columns"},
    {"normalization": "nmf=l1_columns"},
])
def test_invalid_config_raises(mapping):
    with pytest.raises(ConfigError):
        config_from_mapping(mapping)


def test_matching_normalization_is_accepted():
    cfg = config_from_mapping({"normalization": "equinmf=l1_columns, gnmf=l2_columns"})
    assert cfg.normalization == ("equinmf=l1_columns", "gnmf=l2_columns")


def test_missing_config_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/exp.ini")


def test_seed_streams_are_injective():
    streams = set()
    for method in METHODS:
        for run in range(50):
            streams.update(harness._streams(run, method))
    assert len(streams) == 2 * 50 * len(METHODS)


# ----------------------------------------------------------------- runs


@pytest.mark.parametrize("method", ["nmf", "gnmf", "multinmf", "equinmf"])
def test_zero_noise_single_run_recovers_partition(method):
    cfg = ExperimentConfig(synthetic=True, synthetic_samples=15, methods=(method,), runs=1)
    result = run_experiment(cfg)
    assert result.records[0].accuracy == 1.0
    assert result.records[0].nmi == pytest.approx(1.0, abs=1e-12)


def test_records_seeded_and_sorted():
    cfg = small_config(methods=("equinmf", "kmeans"), seed=5)
    result = run_experiment(cfg)
    assert [(r.method, r.seed) for r in result.records] == [
        ("kmeans", 5), ("kmeans", 6), ("kmeans", 7),
        ("equinmf", 5), ("equinmf", 6), ("equinmf", 7),
    ]
    for r in result.records:
        assert 0.0 <= r.accuracy <= 1.0 and 0.0 <= r.nmi <= 1.0
        assert r.wall_ms is None


def test_identical_configs_identical_records():
    cfg = small_config(methods=("nmf", "multinmf"))
    assert run_experiment(cfg).records == run_experiment(cfg).records


def test_parallel_matches_serial():
    cfg = small_config(methods=("nmf", "equinmf"), runs=2)
    assert run_experiment(replace(cfg, workers=2)).records == run_experiment(cfg).records


def test_reports_hold_pairwise_tests():
    cfg = small_config(methods=("kmeans", "nmf", "equinmf"))
    reports = run_experiment(cfg).reports
    assert set(reports["nmf"].significance) == {"kmeans", "equinmf"}
    for entry in reports["nmf"].significance.values():
        assert set(entry) == {"accuracy", "nmi"}
        assert 0.0 <= entry["accuracy"]["p"] <= 1.0


def test_unlabelled_dataset_is_data_error(tmp_path):
    cfg = small_config(methods=("nmf",))
    ds = harness.load_dataset(cfg)
    unlabelled = replace(ds, labels=None)
    with pytest.raises(DataError):
        run_experiment(cfg, unlabelled)


def test_errors_carry_method_and_run(monkeypatch):
    def boom(*a, **k):
        raise SolverDivergence("objective became nan")

    monkeypatch.setattr(harness, "nmf", boom)
    with pytest.raises(SolverDivergence, match=r"nmf run 0 \(seed 0\)"):
        run_experiment(small_config(methods=("nmf",)))


# ----------------------------------------------------------------- sweep


def test_sweep_zero_is_graph_free_and_one_is_plain_run():
    cfg = small_config(methods=("equinmf",), runs=2)
    rows, results = run_sweep(cfg, [0.0, 1.0])
    assert results[0].heuristic is not None
    assert results[0].records == run_experiment(replace(cfg, equinmf_gamma_multiplier=0.0)).records

    plain = run_experiment(cfg)
    rep = plain.reports["equinmf"]
    assert rows[1] == (1.0, rep.accuracy_mean, rep.accuracy_std, rep.nmi_mean, rep.nmi_std)
    assert results[1].records == plain.records


def test_sweep_rejects_bad_input():
    with pytest.raises(ConfigError):
        run_sweep(small_config(methods=("nmf",)), [1.0])
    with pytest.raises(ConfigError):
        run_sweep(small_config(methods=("equinmf",)), [-1.0])


# ----------------------------------------------------------------- emission


@pytest.fixture(scope="module")
def two_by_three():
    return run_experiment(small_config(methods=("nmf", "equinmf")))


def test_emit_six_rows_and_roundtrip(two_by_three, tmp_path):
    emit_results(two_by_three, tmp_path)
    with open(tmp_path / "runs.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 6

    parsed = read_runs_csv(tmp_path / "runs.csv")
    for got, want in zip(parsed, two_by_three.records):
        assert (got.method, got.seed, got.iterations) == (want.method, want.seed, want.iterations)
        for name in ("accuracy", "nmi", "objective"):
            assert abs(getattr(got, name) - getattr(want, name)) <= 1e-12 * max(1.0, abs(getattr(want, name)))

    record = json.loads((tmp_path / "summary.json").read_text())
    assert record == json.loads(json.dumps(two_by_three.summary()))
    assert record["heuristic"]["K"] == 3
    assert record["config"]["methods"] == ["nmf", "equinmf"]


def test_aggregates_recomputed_from_csv_match(two_by_three, tmp_path):
    emit_results(two_by_three, tmp_path, "csv")
    parsed = read_runs_csv(tmp_path / "runs.csv")
    for method, rep in two_by_three.reports.items():
        rows = [r for r in parsed if r.method == method]
        again = summarize(method, [r.accuracy for r in rows], [r.nmi for r in rows])
        assert again.accuracy_mean == rep.accuracy_mean
        assert again.accuracy_std == rep.accuracy_std
        assert again.nmi_mean == rep.nmi_mean
        assert again.nmi_std == rep.nmi_std


def test_summary_csv_rows(two_by_three, tmp_path):
    emit_results(two_by_three, tmp_path, "csv")
    with open(tmp_path / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["method"], r["metric"]) for r in rows] == [
        ("nmf", "accuracy"), ("nmf", "nmi"), ("equinmf", "accuracy"), ("equinmf", "nmi")]
    assert all(r["dataset"] == "synthetic" for r in rows)
    assert float(rows[2]["mean"]) == two_by_three.reports["equinmf"].accuracy_mean


def test_emission_is_byte_stable(tmp_path):
    cfg = small_config(methods=("kmeans", "gnmf"))
    for sub in ("a", "b"):
        emit_results(run_experiment(cfg), tmp_path / sub)
    for name in ("runs.csv", "summary.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_wall_time_only_on_request(tmp_path):
    result = run_experiment(small_config(methods=("nmf",), runs=1, record_wall_time=True))
    assert result.records[0].wall_ms > 0
    emit_results(result, tmp_path, "csv")
    assert read_runs_csv(tmp_path / "runs.csv")[0].wall_ms == pytest.approx(result.records[0].wall_ms)


def test_unwritable_output_is_data_error(two_by_three, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(DataError):
        emit_results(two_by_three, blocker / "out")


# ----------------------------------------------------------------- CLI


SYNTH_FLAGS = ["--dataset.synthetic", "true", "--dataset.samples_per_cluster", "8",
               "--dataset.dims", "6,9", "--max_iter", "20", "--kmeans.repeats", "3",
               "--multinmf.rounds", "3", "--inner_iter", "5"]


def test_cli_cluster_writes_outputs(tmp_path, capsys):
    code = cli.main(["cluster", *SYNTH_FLAGS, "--methods", "nmf,equinmf", "--runs", "2",
                     "--out", str(tmp_path)])
    assert code == 0
    assert len(read_runs_csv(tmp_path / "runs.csv")) == 4
    assert "equinmf" in capsys.readouterr().out


def test_cli_sweep_writes_table(tmp_path):
    code = cli.main(["sweep", *SYNTH_FLAGS, "--runs", "2", "--multipliers", "0,1",
                     "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SWEEP_HEADER
    assert [float(r[0]) for r in rows[1:]] == [0.0, 1.0]


def test_cli_datagen_then_cluster_on_files(tmp_path):
    data = tmp_path / "data"
    assert cli.main(["datagen", "--clusters", "2", "--samples", "6", "--dims", "5,7",
                     "--out", str(data)]) == 0
    views = ",".join(str(data / f"view{v}.txt") for v in range(2))
    code = cli.main(["cluster", "--dataset.view_paths", views, "--dataset.labels_path",
                     str(data / "labels.txt"), "--methods", "nmf", "--runs", "1",
                     "--knn_k", "3", "--out", str(tmp_path / "out")])
    assert code == 0
    assert read_runs_csv(tmp_path / "out" / "runs.csv")[0].accuracy == 1.0


def test_cli_check_reports_diagnostics(capsys):
    assert cli.main(["check", *SYNTH_FLAGS]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["graph"]["symmetric"] is True
    assert report["graph"]["max_laplacian_row_sum"] == 0.0
    assert report["graph"]["quadratic_form_gap"] < 1e-9
    g = report["gradient_check"]
    assert g["finite_difference"] == pytest.approx(g["analytic"], rel=1e-5)
    assert report["descent"]["after_20"] < report["descent"]["initial"]
    assert report["expected_contribution"]["view_ratio"] == pytest.approx(1.0, rel=0.5)


def test_cli_exit_code_config(capsys):
    assert cli.main(["cluster", *SYNTH_FLAGS, "--runs", "0"]) == 1
    assert cli.main(["cluster", *SYNTH_FLAGS, "--normalization", "equinmf=l2_columns"]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_exit_code_data(tmp_path, capsys):
    bad = tmp_path / "neg.txt"
    bad.write_text("1 2\n-3 4\n")
    assert cli.main(["cluster", "--dataset.view_paths", str(bad), "--runs", "1",
                     "--out", str(tmp_path / "out")]) == 2
    assert "data error" in capsys.readouterr().err


def test_cli_exit_code_divergence(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise SolverDivergence("objective became inf")

    monkeypatch.setattr(harness, "equinmf", boom)
    assert cli.main(["cluster", *SYNTH_FLAGS, "--methods", "equinmf", "--runs", "1",
                     "--out", str(tmp_path)]) == 3
