import json

import numpy as np
import pytest

from gcsgp.benchmark import (
    BenchmarkConfig,
    BenchmarkReport,
    Variant,
    builtin_config,
    example1_variants,
    run_benchmark,
)
from gcsgp.cli import main
from gcsgp.config import ConfigError, build_kernel, load_config, parse_config
from gcsgp.covariance import cs_matrix, CSSpec, GroupPartition
from gcsgp.covariance.io import write_matrix_csv, matrix_to_json
from gcsgp.data import InputSchema, read_csv, write_csv
from gcsgp.design import slhd
from gcsgp.exceptions import DomainError
from gcsgp.gp import FitConfig, GPModel
from gcsgp.kernels import Combine, SphericalKernel

SCHEMA_DOC = {"continuous": ["x"], "categorical": [{"name": "u", "levels": 4}]}
KERNEL_DOC = {
    "x": {"family": "matern52", "lengthscale": 0.3},
    "u": {"type": "gcs", "groups": [[1, 2], [3, 4]], "within": "cs", "between": "general"},
}


def write_config(tmp_path, **extra):
    doc = {"schema": SCHEMA_DOC, "kernel": KERNEL_DOC, "fit": {"n_starts": 2, "seed": 1}}
    doc.update(extra)
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


def write_training_data(tmp_path, n_per_level=5):
    schema = InputSchema(("x",), (("u", 4),))
    d = slhd(n_per_level, 4, 1, seed=0)
    y = np.sin(5 * d.X[:, 0]) * np.where(d.U[:, 0] <= 2, 1.0, -0.5)
    p = tmp_path / "train.csv"
    write_csv(p, schema, d.X, d.U, y)
    return p


# ------------------------------------------------------------------ config


def test_build_kernel_product_of_leaves():
    cfg = parse_config({"schema": SCHEMA_DOC, "kernel": KERNEL_DOC})
    k = cfg.build_kernel()
    assert isinstance(k.expr, Combine) and k.expr.op == "product"
    assert not k.variance_free  # the GCS leaf carries the variance


def test_build_kernel_second_categorical_becomes_correlation():
    schema = InputSchema(("x",), (("a", 3), ("b", 2)))
    k = build_kernel(schema, {"x": {}, "a": {"type": "cs"}, "b": {"type": "cs"}})
    leaves = k.categorical_leaves()
    assert [leaf.correlation for leaf in leaves] == [False, True]


def test_shorthand_blocks_are_completed():
    schema = InputSchema(("x",), (("u", 5),))
    k = build_kernel(schema, {"x": {}, "u": {"type": "spherical"}})
    assert isinstance(k.categorical_leaves()[0].kernel, SphericalKernel)
    assert k.categorical_leaves()[0].kernel.levels == 5


@pytest.mark.parametrize(
    "doc, match",
    [
        ({"kernel": KERNEL_DOC}, "schema"),
        ({"schema": SCHEMA_DOC, "kernel": KERNEL_DOC, "extra": 1}, "unknown section"),
        ({"schema": SCHEMA_DOC, "kernel": {"x": {}}}, "no block"),
        ({"schema": SCHEMA_DOC, "kernel": {**KERNEL_DOC, "z": {}}}, "unknown input"),
        ({"schema": SCHEMA_DOC, "kernel": {**KERNEL_DOC, "u": {"type": "gcs", "groups": [[1, 2], [3]]}}}, "cover"),
        ({"schema": SCHEMA_DOC, "kernel": {**KERNEL_DOC, "u": {"type": "nope"}}}, "unknown categorical"),
        ({"schema": SCHEMA_DOC, "kernel": KERNEL_DOC, "combination": "xor"}, "combination"),
        ({"schema": SCHEMA_DOC, "fit": {"restarts": 2}}, "unknown field"),
    ],
)
def test_config_errors_name_the_field(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(doc)


def test_load_config_reports_json_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"schema": {\n  "continuous": [\n}')
    with pytest.raises(ConfigError, match=r"bad.json:3"):
        load_config(p)


# --------------------------------------------------------------- benchmark


def _small_bench(**kw):
    base = dict(
        function="example1",
        variants=[example1_variants()[1]],
        repetitions=1,
        design={"type": "slhd", "points_per_level": 8},
        test_grid=200,
        fit=FitConfig(n_starts=2),
        seed=3,
    )
    base.update(kw)
    return BenchmarkConfig(**base)


def test_benchmark_sanity_interpolation():
    report = run_benchmark(_small_bench())
    assert report.q2_samples("2 groups")[0] >= 0.99


def test_benchmark_report_files_are_deterministic(tmp_path):
    cfg = _small_bench(repetitions=2, design={"type": "slhd", "points_per_level": 2}, test_grid=50,
                       fit=FitConfig(n_starts=1))
    run_benchmark(cfg, tmp_path / "a")
    run_benchmark(cfg, tmp_path / "b")
    for name in ("summary.json", "q2.csv", "correlation_2_groups.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    v = summary["variants"]["2 groups"]
    assert len(v["q2"]) == 2
    assert np.asarray(v["median_run_correlation"]).shape == (13, 13)


def test_benchmark_records_failures_and_continues():
    bad = Variant("broken", {"type": "group", "groups": [list(range(1, 10)), [10, 11, 12, 13]]},
                  {"start_ranges": {"log_variance": [60.0, 61.0]}})
    cfg = _small_bench(variants=[bad, example1_variants()[0]], design={"type": "slhd", "points_per_level": 2},
                       test_grid=20, fit=FitConfig(n_starts=1))
    report = run_benchmark(cfg)
    broken = [c for c in report.cells if c["variant"] == "broken"]
    assert broken[0]["q2"] is None and "FitError" in broken[0]["error"]
    assert report.q2_samples("1 group").size == 1


def test_reference_counts_by_variant():
    cfg = builtin_config("example1")
    report = BenchmarkReport(cfg, [])
    counts = {v.name: report.parameter_counts(v) for v in cfg.variants}
    ref = [counts[v.name]["reference"] for v in cfg.variants]
    assert ref[:4] == [5, 7, 10, 19]
    assert ref[5] == 16
    # differences between variants equal differences in categorical parameter counts
    cat = {"1 group": 2, "2 groups": 4, "5 groups (a)": 7, "5 groups (b)": 16, "13 groups": 79, "ordinal": 13}
    names = [v.name for v in cfg.variants]
    for a in names:
        for b in names:
            assert counts[a]["reference"] - counts[b]["reference"] == cat[a] - cat[b]


def test_benchmark_config_validation():
    with pytest.raises(ConfigError):
        _small_bench(repetitions=0)
    with pytest.raises(ConfigError):
        _small_bench(variants=[])
    with pytest.raises(ConfigError):
        _small_bench(design={"type": "sobol", "points_per_level": 3})
    with pytest.raises(DomainError):
        _small_bench(function="branin")
    cfg = BenchmarkConfig.from_dict({"preset": "example2", "repetitions": 2})
    assert cfg.function == "example2" and cfg.repetitions == 2
    assert [v.name for v in cfg.variants] == ["2 groups", "3 groups"]


# --------------------------------------------------------------------- CLI


def test_validate_non_psd_matrix_exits_1(tmp_path, capsys):
    # two CS groups with a between covariance too large for the block averages
    T = np.zeros((5, 5))
    T[:3, :3] = cs_matrix(CSSpec(3, 1.0, 0.5))
    T[3:, 3:] = cs_matrix(CSSpec(2, 1.0, 0.5))
    T[:3, 3:] = 0.95
    T[3:, :3] = 0.95
    assert np.linalg.eigvalsh(T).min() < 0  # eigenvalue oracle
    p = tmp_path / "T.csv"
    write_matrix_csv(p, T)
    out = tmp_path / "report.json"
    code = main(["validate", "--data", str(p), "--groups", "3,2", "--out", str(out)])
    assert code == 1
    report = json.loads(out.read_text())
    assert report["is_psd"] is False
    assert any("block-averaged matrix is not PSD" in m for m in report["failing_checks"])
    assert "block-averaged" in capsys.readouterr().err


def test_validate_psd_json_matrix_exits_0(tmp_path):
    T = cs_matrix(CSSpec(4, 1.0, 0.3))
    p = tmp_path / "T.json"
    p.write_text(json.dumps(matrix_to_json(T, GroupPartition([2, 2]))))
    assert main(["validate", "--data", str(p), "--out", str(tmp_path / "r.json")]) == 0


def test_validate_without_partition_is_usage_error(tmp_path):
    p = tmp_path / "T.csv"
    write_matrix_csv(p, np.eye(3))
    assert main(["validate", "--data", str(p)]) == 2


def test_fit_predict_roundtrip(tmp_path):
    cfg = write_config(tmp_path)
    train = write_training_data(tmp_path)
    model_path = tmp_path / "model.json"
    assert main(["fit", "--config", str(cfg), "--data", str(train), "--out", str(model_path)]) == 0

    schema = InputSchema(("x",), (("u", 4),))
    pts = tmp_path / "points.csv"
    rng = np.random.default_rng(0)
    X, U = rng.uniform(size=(25, 1)), rng.integers(1, 5, size=(25, 1))
    write_csv(pts, schema, X, U)
    preds = tmp_path / "preds.csv"
    assert main(["predict", "--model", str(model_path), "--data", str(pts), "--out", str(preds)]) == 0

    import csv

    rows = list(csv.DictReader(open(preds)))
    mean = np.array([float(r["mean"]) for r in rows])
    var = np.array([float(r["variance"]) for r in rows])
    model = GPModel.load(model_path)
    m_ref, v_ref = model.predict(X, U)
    np.testing.assert_allclose(mean, m_ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(var, v_ref, rtol=0, atol=1e-12)


def test_fit_seed_flag_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    train = write_training_data(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["fit", "--config", str(cfg), "--data", str(train), "--out", str(out), "--seed", "7"]) == 0
    assert json.loads(a.read_text())["params"] == json.loads(b.read_text())["params"]


def test_fit_malformed_csv_reports_line(tmp_path, capsys):
    cfg = write_config(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,u,y\n0.1,1,0.5\n0.2,two,0.1\n")
    code = main(["fit", "--config", str(cfg), "--data", str(bad), "--out", str(tmp_path / "m.json")])
    assert code == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_fit_level_out_of_range_is_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,u,y\n0.1,1,0.5\n0.2,7,0.1\n")
    assert main(["fit", "--config", str(cfg), "--data", str(bad), "--out", str(tmp_path / "m.json")]) == 2
    assert "1..4" in capsys.readouterr().err


def test_missing_required_flag_is_usage_error(tmp_path):
    assert main(["fit", "--data", "x.csv"]) == 2
    assert main(["nonsense"]) == 2


def test_design_command(tmp_path):
    out = tmp_path / "design.csv"
    assert main(["design", "--kind", "slhd", "--m", "3", "--levels", "13", "--seed", "1", "--out", str(out)]) == 0
    ds = read_csv(out, InputSchema(("x1",), (("u", 13),)), require_response=False)
    assert ds.n == 39
    cfg = write_config(tmp_path)
    assert main(["design", "--kind", "stratified", "--m", "2", "--config", str(cfg), "--out", str(out)]) == 0
    assert read_csv(out, InputSchema(("x",), (("u", 4),)), require_response=False).n == 8


def test_export_correlation(tmp_path):
    cfg = write_config(tmp_path)
    train = write_training_data(tmp_path)
    model_path = tmp_path / "model.json"
    main(["fit", "--config", str(cfg), "--data", str(train), "--out", str(model_path)])
    out = tmp_path / "corr.csv"
    assert main(["export-correlation", "--model", str(model_path), "--out", str(out)]) == 0
    from gcsgp.covariance.io import read_matrix_csv

    R, labels = read_matrix_csv(out)
    assert labels == ["u1", "u2", "u3", "u4"]
    np.testing.assert_allclose(np.diag(R), 1.0)
    assert main(["export-correlation", "--model", str(model_path), "--input", "v", "--out", str(out)]) == 2


def test_benchmark_command_twice_identical(tmp_path):
    bench = {
        "function": "example2",
        "variants": [{"name": "3 groups", "categorical": {"type": "gcs", "groups": [[1, 2, 3, 4], [5, 6, 7], [8, 9, 10]],
                                                          "within": "cs", "between": "general"}}],
        "repetitions": 1,
        "design": {"type": "stratified", "points_per_level": 2},
        "test_grid": 20,
    }
    doc = {"schema": {"continuous": ["x"], "categorical": [{"name": "u", "levels": 10}]},
           "fit": {"n_starts": 1}, "benchmark": bench}
    p = tmp_path / "bench.json"
    p.write_text(json.dumps(doc))
    for d in ("r1", "r2"):
        assert main(["benchmark", "--config", str(p), "--out", str(tmp_path / d), "--seed", "5"]) == 0
    for name in ("summary.json", "q2.csv", "correlation_3_groups.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
