import json
import re
import shutil
import subprocess

import numpy as np
import pytest

from lrao.harness import cli, io

ERROR_LINE = re.compile(r"^error: [A-Za-z]+: \S.*$")

SMALL = {
    "simulate-cauchy": ["--train.max_epochs", "2", "--data.train", "8", "--data.validation", "4",
                        "--data.context", "16", "--data.context_long", "4", "--n_long", "256",
                        "--evaluation.trials", "50", "--evaluation.snr_db_long", "[auto]"],
    "gm-demo": ["--trials", "100", "--context_sequences", "100", "--shifts.count", "3"],
    "sensor-cv": ["--surrogate.length", "2560", "--cv.outer_folds", "4", "--cv.inner_folds", "3",
                  "--cv.repeats", "2", "--train.max_epochs", "2", "--h1_draws", "2"],
    "surrogate-gen": ["--length", "2000"],
}


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def status(out):
    doc = json.loads(out.strip().splitlines()[-1])
    assert doc["status"] == "ok"
    return doc


@pytest.fixture(scope="module")
def series(tmp_path_factory):
    d = tmp_path_factory.mktemp("series")
    assert cli.main(["surrogate-gen", "--seed", "5", "--length", "3000", "--out", str(d)]) == 0
    return d / "series.txt"


class TestErrors:
    def test_missing_seed(self, tmp_path, capsys):
        code, out, err = run(["gm-demo", "--out", tmp_path], capsys)
        assert code == cli.EXIT_USAGE
        assert ERROR_LINE.match(err.strip()) and "--seed" in err
        assert out == ""

    def test_no_command(self, capsys):
        code, _, err = run([], capsys)
        assert code == cli.EXIT_USAGE and ERROR_LINE.match(err.strip())

    def test_unknown_key(self, tmp_path, capsys):
        code, _, err = run(["gm-demo", "--seed", 1, "--out", tmp_path, "--set", "bogus=1"], capsys)
        assert code == cli.EXIT_USAGE
        assert err.strip() == "error: ConfigError: unknown configuration key 'bogus'"

    def test_malformed_set(self, tmp_path, capsys):
        code, _, err = run(["gm-demo", "--seed", 1, "--out", tmp_path, "--set", "trials"], capsys)
        assert code == cli.EXIT_USAGE and "KEY=VALUE" in err

    def test_missing_config_file(self, tmp_path, capsys):
        code, _, err = run(["gm-demo", "--seed", 1, "--out", tmp_path,
                            "--config", tmp_path / "nope.yaml"], capsys)
        assert code == cli.EXIT_USAGE and ERROR_LINE.match(err.strip())

    def test_manifest_from_other_command(self, tmp_path, capsys, series):
        code, _, err = run(["gm-demo", "--seed", 1, "--out", tmp_path,
                            "--config", series.parent / "manifest.json"], capsys)
        assert code == cli.EXIT_USAGE and "surrogate-gen" in err

    def test_bad_series_is_runtime_failure(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1\n2\nthree\n")
        code, _, err = run(["train", "--seed", 1, "--out", tmp_path / "o", "--series", bad], capsys)
        assert code == cli.EXIT_FAILURE
        assert err.strip().startswith("error: DataFormatError:") and ":3:" in err
        assert len(err.strip().splitlines()) == 1

    def test_detect_cnn_needs_model(self, tmp_path, capsys, series):
        code, _, err = run(["detect", "--out", tmp_path, "--noise", series, "--input", series],
                           capsys)
        assert code == cli.EXIT_USAGE and "--model" in err


class TestOverrides:
    def test_flag_set_and_file_precedence(self, tmp_path, capsys):
        (tmp_path / "c.yaml").write_text("trials: 80\nshifts: {count: 5}\n")
        code, out, _ = run(["gm-demo", "--seed", 3, "--out", tmp_path / "o", "--config",
                            tmp_path / "c.yaml", "--set", "shifts.count=3", "--context-sequences",
                            "90"], capsys)
        assert code == 0
        m = io.read_manifest(tmp_path / "o" / "manifest.json")
        assert m["config"]["trials"] == 80
        assert m["config"]["shifts"]["count"] == 3
        assert m["config"]["context_sequences"] == 90
        _, rows = io.read_table_csv(tmp_path / "o" / "gm_demo.csv")
        assert len(rows) == 3 * 2


@pytest.mark.parametrize("command", sorted(SMALL))
def test_rerun_from_manifest_is_bit_identical(command, tmp_path, capsys):
    first, second = tmp_path / "a", tmp_path / "b"
    code, out, _ = run([command, "--seed", 7, "--out", first, *SMALL[command]], capsys)
    assert code == 0, out
    status(out)
    code, out, _ = run([command, "--seed", 7, "--out", second, "--config",
                        first / "manifest.json"], capsys)
    assert code == 0
    m1, m2 = (io.read_manifest(d / "manifest.json") for d in (first, second))
    assert m1["outputs"] == m2["outputs"]
    for name in m1["outputs"]:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_train_detect_roc_pipeline(tmp_path, capsys, series):
    code, out, _ = run(["train", "--seed", 2, "--out", tmp_path / "m", "--series", series,
                        "--train.max_epochs", 3, "--train.learning_rate", 1e-2], capsys)
    assert code == 0
    assert status(out)["summary"]["best_epoch"] <= 3
    params, doc = io.load_model(tmp_path / "m" / "model.json")
    assert doc["seed"] == params.seed

    x = io.load_series(series)
    n = 128
    t = np.arange(x.size)
    tone = 0.5 * np.cos(2 * np.pi * 0.1 * t)
    io.save_series(tmp_path / "h1.txt", x + tone)
    for name, inp in (("h0", series), ("h1", tmp_path / "h1.txt")):
        code, out, _ = run(["detect", "--out", tmp_path / name, "--model", tmp_path / "m/model.json",
                            "--noise", series, "--input", inp], capsys)
        assert code == 0
        assert status(out)["summary"]["sequences"] == x.size // n
    code, out, _ = run(["roc", "--out", tmp_path / "r", "--h0", tmp_path / "h0/statistics.csv",
                        "--h1", tmp_path / "h1/statistics.csv"], capsys)
    assert code == 0
    auc = status(out)["summary"]["auc"]
    fpr, tpr = io.read_roc_csv(tmp_path / "r" / "roc.csv")
    assert fpr[0] == 0 and tpr[-1] == 1 and auc > 0.5


@pytest.mark.parametrize("kind", ["lrao_identity", "limiter3", "sign", "identity"])
def test_detect_reference_kinds(kind, tmp_path, capsys, series):
    code, out, _ = run(["detect", "--out", tmp_path, "--noise", series, "--input", series,
                        "--detector", kind], capsys)
    assert code == 0
    header, rows = io.read_table_csv(tmp_path / "statistics.csv")
    assert header == ["sequence", "statistic", "decision"] and len(rows) == 3000 // 128


def test_sensor_cv_on_user_series(tmp_path, capsys, series):
    code, out, _ = run(["sensor-cv", "--seed", 1, "--out", tmp_path, "--series", series,
                        *SMALL["sensor-cv"][2:]], capsys)
    assert code == 0
    m = io.read_manifest(tmp_path / "manifest.json")
    assert m["dataset"]["provenance"] == str(series)
    assert m["dataset"]["preproc"]["dropped_samples"] == 3000 - 23 * 128
    header, rows = io.read_table_csv(tmp_path / "summary.csv")
    assert header == ["fold", "repeat", "detector", "auc"] and len(rows) == 4 * 2 * 4


@pytest.mark.skipif(shutil.which("lrao") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["lrao", "surrogate-gen", "--seed", "1", "--length", "300", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["summary"]["samples"] == 300
    proc = subprocess.run(["lrao", "surrogate-gen", "--out", str(tmp_path)], capture_output=True,
                          text=True)
    assert proc.returncode == 2 and ERROR_LINE.match(proc.stderr.strip())
