import json

import numpy as np
import pytest

from conftest import REFERENCE_SAMPLE
from outlierkit.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, ingest_csv, main
from outlierkit.errors import DataError


@pytest.fixture()
def reference_csv(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("x\n" + "\n".join(repr(v) for v in REFERENCE_SAMPLE) + "\n")
    return path


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def test_ingest_headerless(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("\n".join(str(v) for v in REFERENCE_SAMPLE) + "\n")
    values, labels = ingest_csv(path)
    assert values == pytest.approx(list(REFERENCE_SAMPLE))
    assert labels == list(range(1, 21))


def test_ingest_with_header_by_name(reference_csv):
    values, labels = ingest_csv(reference_csv, "x")
    assert values == pytest.approx(list(REFERENCE_SAMPLE))
    assert labels == list(range(1, 21))


def test_ingest_header_autodetected(reference_csv):
    values, _ = ingest_csv(reference_csv)
    assert values == pytest.approx(list(REFERENCE_SAMPLE))


def test_ingest_by_column_index(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("id,value\n1,10.5\n2,11.5\n")
    values, labels = ingest_csv(path, "2")
    assert values == [10.5, 11.5]
    assert labels == [1, 2]


def test_ingest_rejects_nan_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x\n1.0\nNaN\n2.0\n")
    with pytest.raises(DataError, match="row 2"):
        ingest_csv(path, "x")


def test_ingest_rejects_text_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x\n1.0\noops\n")
    with pytest.raises(DataError, match="row 2, column 1"):
        ingest_csv(path, "x")


def test_ingest_missing_column(tmp_path):
    path = tmp_path / "narrow.csv"
    path.write_text("x\n1.0\n")
    with pytest.raises(DataError, match="no column named"):
        ingest_csv(path, "y")


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_csv(tmp_path / "absent.csv")


# ---------------------------------------------------------------------------
# detect command
# ---------------------------------------------------------------------------


def test_detect_end_to_end(reference_csv, tmp_path, capsys):
    out = tmp_path / "report.json"
    rc = main(
        [
            "detect",
            "--input", str(reference_csv),
            "--column", "x",
            "--method", "bp",
            "--family", "normal",
            "--side", "two",
            "--alpha", "0.05",
            "--replicates", "50000",
            "--seed", "11",
            "--cache", str(tmp_path / "cache.tsv"),
            "--output", str(out),
        ]
    )
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "7 outliers" in text
    assert "step trail" in text
    report = json.loads(out.read_text())
    assert report["outliers"] == [1, 2, 3, 17, 18, 19, 20]
    assert report["config"]["seed"] == 11
    assert (tmp_path / "cache.tsv").exists()

    # second run hits the cache
    rc = main(
        [
            "detect",
            "--input", str(reference_csv),
            "--replicates", "50000",
            "--seed", "11",
            "--cache", str(tmp_path / "cache.tsv"),
        ]
    )
    assert rc == EXIT_OK
    assert "(cache," in capsys.readouterr().out


def test_detect_no_outliers_exit_zero(tmp_path, capsys):
    path = tmp_path / "clean.csv"
    rng = np.random.default_rng(37)
    path.write_text("\n".join(repr(float(v)) for v in rng.standard_normal(100)))
    rc = main(["detect", "--input", str(path), "--replicates", "30000",
               "--cache", str(tmp_path / "c.tsv")])
    assert rc == EXIT_OK
    assert "no outliers" in capsys.readouterr().out


def test_detect_missing_file_is_data_error(tmp_path, capsys):
    rc = main(["detect", "--input", str(tmp_path / "nope.csv")])
    assert rc == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_detect_rosner_without_s_is_config_error(reference_csv, tmp_path, capsys):
    rc = main(
        ["detect", "--input", str(reference_csv), "--method", "rosner",
         "--cache", str(tmp_path / "c.tsv")]
    )
    assert rc == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_detect_small_sample_refused_then_forced(tmp_path, capsys):
    path = tmp_path / "tiny.csv"
    path.write_text("\n".join(str(v) for v in range(12)))
    rc = main(["detect", "--input", str(path), "--replicates", "20000",
               "--cache", str(tmp_path / "c.tsv")])
    assert rc == EXIT_CONFIG
    rc = main(["detect", "--input", str(path), "--replicates", "20000", "--force",
               "--cache", str(tmp_path / "c.tsv")])
    assert rc == EXIT_OK
    capsys.readouterr()


def test_detect_json_flag_prints_report(reference_csv, tmp_path, capsys):
    rc = main(
        ["detect", "--input", str(reference_csv), "--json", "--replicates", "30000",
         "--cache", str(tmp_path / "c.tsv")]
    )
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    payload = out[out.index("{"):]
    assert json.loads(payload)["outliers"] == [1, 2, 3, 17, 18, 19, 20]


def test_usage_error_exit_code():
    assert main(["detect"]) == EXIT_CONFIG  # --input missing


# ---------------------------------------------------------------------------
# simulate-critical command
# ---------------------------------------------------------------------------


def test_simulate_critical_writes_cache(tmp_path, capsys):
    cache = tmp_path / "cache.tsv"
    args = [
        "simulate-critical", "--method", "bp", "--s", "5", "--alpha", "0.05",
        "--side", "two", "--replicates", "30000", "--seed", "3", "--cache", str(cache),
    ]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    assert "simulated" in first
    assert cache.exists()
    assert main(args) == EXIT_OK
    assert "cache hit" in capsys.readouterr().out


def test_env_var_cache_override(tmp_path, monkeypatch, capsys):
    target = tmp_path / "env-cache.tsv"
    monkeypatch.setenv("OUTLIERKIT_CACHE", str(target))
    rc = main(
        ["simulate-critical", "--method", "bp", "--s", "5", "--alpha", "0.1",
         "--replicates", "30000", "--seed", "4"]
    )
    assert rc == EXIT_OK
    assert target.exists()
    capsys.readouterr()


# ---------------------------------------------------------------------------
# experiment and significance-curve commands
# ---------------------------------------------------------------------------


def test_experiment_csv_reproducible(tmp_path, capsys):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    base = [
        "experiment", "--methods", "bp", "--family", "normal", "--n", "30",
        "--r", "2", "--contaminant", "exponential", "--theta", "5",
        "--M", "20", "--seed", "9", "--replicates", "20000",
        "--cache", str(tmp_path / "c.tsv"),
    ]
    assert main(base + ["--output", str(out1)]) == EXIT_OK
    assert main(base + ["--output", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header.split(",")[:5] == ["method", "family", "n", "r", "param"]
    capsys.readouterr()


def test_experiment_grid_order_and_errors(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    rc = main(
        [
            "experiment", "--methods", "bp,rosner", "--family", "normal",
            "--n", "30", "--r", "2", "--theta", "1,5", "--M", "10",
            "--seed", "9", "--replicates", "20000",
            "--cache", str(tmp_path / "c.tsv"), "--output", str(out),
        ]
    )
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert len(lines) == 5  # header + 2 methods x 1 n x 1 r x 2 thetas
    assert lines[1].startswith("bp,normal,30,2,theta=1")
    assert lines[2].startswith("bp,normal,30,2,theta=5")
    # rosner cells fail (no --s) but are recorded with the error column
    assert lines[3].count(",") == len(lines[0].split(",")) - 1
    assert "required" in lines[3]
    err = capsys.readouterr().err
    assert "2 of 4 cells failed" in err


def test_experiment_s_rule(tmp_path, capsys):
    out = tmp_path / "rule.csv"
    rc = main(
        [
            "experiment", "--methods", "rosner", "--family", "normal",
            "--n", "30", "--r", "2", "--theta", "5", "--M", "10",
            "--s", "0.4n", "--seed", "9", "--replicates", "20000",
            "--cache", str(tmp_path / "c.tsv"), "--output", str(out),
        ]
    )
    assert rc == EXIT_OK
    assert out.read_text().splitlines()[1].split(",")[-1] == ""
    capsys.readouterr()


def test_significance_curve_csv(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    rc = main(
        [
            "significance-curve", "--method", "bp", "--family", "normal",
            "--n-grid", "30,40", "--M", "25", "--seed", "5",
            "--replicates", "20000", "--cache", str(tmp_path / "c.tsv"),
            "--output", str(out),
        ]
    )
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "n,significance"
    assert len(lines) == 3
    capsys.readouterr()
