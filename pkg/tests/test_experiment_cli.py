import csv
import io
import math

import numpy as np
import pytest

from rbmcs.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from rbmcs.config import ConfigError, dump_config, parse_config
from rbmcs.experiment import CSV_COLUMNS, DataError, run_experiment, summarize, write_csv
from rbmcs.synthetic import synthetic_ecg, to_adu
from rbmcs.wfdb import write_record

SMALL = ["synthetic_seconds=20", "window=64", "levels=3", "sparsity=12", "rbm_epochs=3",
         "max_test_segments=20", "m_ratios=0.3,0.5", "timing=false"]


def small_cfg(*extra):
    return parse_config("", SMALL + list(extra))


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.window == 128 and cfg.sparsity_k == 13 and cfg.n_hidden == 128
        assert cfg.stride == 32

    def test_dictionary_defaults(self):
        cfg = parse_config("transform = dictionary\nwindow = 100\n")
        assert cfg.n_atoms == 300 and cfg.sparsity_k == 8

    def test_comments_and_lists(self):
        cfg = parse_config("# hi\nm_ratios = 0.2, 0.4  # sweep\nalgorithms = omp\n")
        assert cfg.m_ratios == (0.2, 0.4) and cfg.algorithms == ("omp",)

    def test_override_wins(self):
        assert parse_config("seed = 1\n", ["seed=7"]).seed == 7

    @pytest.mark.parametrize("text", ["bogus = 1", "window", "window = abc",
                                      "transform = fourier", "m_ratios = 1.5",
                                      "algorithms = lasso", "window = 100"])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_dump_round_trip(self):
        cfg = small_cfg("algorithms=omp")
        assert parse_config(dump_config(cfg)) == cfg


@pytest.fixture(scope="module")
def rows():
    return run_experiment(small_cfg())


class TestExperiment:
    def test_row_layout(self, rows):
        assert len(rows) == 2 * 2  # algorithms x ratios
        assert [(r["algorithm"], r["M_over_N"]) for r in rows] == [
            ("rbm-omp-like", 19 / 64), ("rbm-omp-like", 32 / 64), ("omp", 19 / 64), ("omp", 32 / 64)]
        for r in rows:
            assert set(CSV_COLUMNS) == set(r)
            assert r["wall_time_ms"] == 0.0
            assert math.isfinite(r["r_snr_mean"])

    def test_csv_deterministic(self, rows):
        a, b = io.StringIO(), io.StringIO()
        write_csv(rows, a)
        write_csv(run_experiment(small_cfg()), b)
        assert a.getvalue() == b.getvalue()
        parsed = list(csv.reader(io.StringIO(a.getvalue())))
        assert tuple(parsed[0]) == CSV_COLUMNS and len(parsed) == 5

    def test_more_measurements_help(self, rows):
        by = {(r["algorithm"], r["M_over_N"]): r["r_snr_mean"] for r in rows}
        assert by[("rbm-omp-like", 0.5)] > by[("rbm-omp-like", 19 / 64)]

    def test_summary(self, rows):
        out = summarize(rows + rows)
        assert len(out) == 4
        assert out[0]["r_snr_mean"] == pytest.approx(rows[0]["r_snr_mean"])

    def test_missing_record(self, tmp_path):
        cfg = parse_config("", ["source=wfdb", f"data_dir={tmp_path}", "train_records=100",
                                "test_records=101"])
        with pytest.raises(DataError, match="100"):
            run_experiment(cfg)

    def test_wfdb_source(self, tmp_path):
        for i, name in enumerate(("900", "901")):
            x, _ = synthetic_ecg(360 * 20, seed=i)
            write_record(tmp_path, name, np.vstack([to_adu(x), to_adu(-x)]), 360)
        cfg = small_cfg("source=wfdb", f"data_dir={tmp_path}", "train_records=900",
                        "test_records=901", "m_ratios=0.5", "algorithms=omp")
        (row,) = run_experiment(cfg)
        assert row["record"] == "901" and row["r_snr_mean"] > 10


class TestCli:
    def test_usage_errors(self):
        assert main([]) == EXIT_USAGE
        assert main(["experiment", "--set", "nonsense=1"]) == EXIT_USAGE

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK

    def test_missing_data(self, tmp_path):
        args = ["experiment", "--set", "source=wfdb", "--set", f"data_dir={tmp_path}",
                "--set", "train_records=1", "--set", "test_records=1"]
        assert main(args) == EXIT_DATA
        assert main(["reconstruct", "--model", str(tmp_path / "none"), "--input", "x",
                     "--out", "y"]) == EXIT_DATA

    def test_corrupt_model(self, tmp_path):
        (tmp_path / "bad").write_bytes(b"junk")
        np.savez(tmp_path / "sig.npz", signal=np.zeros(128), fs=360.0)
        assert main(["reconstruct", "--model", str(tmp_path / "bad"),
                     "--input", str(tmp_path / "sig.npz"), "--out", "o"]) == EXIT_DATA

    def test_pipeline(self, tmp_path, capsys):
        x, _ = synthetic_ecg(360 * 20, seed=5)
        write_record(tmp_path, "rec", np.vstack([to_adu(x), to_adu(x)]), 360)
        sig = tmp_path / "sig.npz"
        assert main(["convert", str(tmp_path), "rec", "--out", str(sig)]) == EXIT_OK
        sets = sum((["--set", s] for s in SMALL), [])
        model = tmp_path / "m.csrbm"
        assert main(["train-dict", *sets, "--out", str(model)]) == EXIT_OK
        assert main(["train-rbm", *sets, "--model", str(model), "--out", str(model)]) == EXIT_OK
        out = tmp_path / "rec.npz"
        assert main(["reconstruct", "--model", str(model), "--input", str(sig),
                     "--out", str(out), "--m-ratio", "0.5"]) == EXIT_OK
        assert main(["evaluate", "--original", str(sig), "--reconstructed", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "r_snr_db" in text and "psim_recall" in text
        csv_path = tmp_path / "res.csv"
        assert main(["experiment", *sets, "--set", f"model={model}",
                     "--out", str(csv_path)]) == EXIT_OK
        assert csv_path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
