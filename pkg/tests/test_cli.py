"""End-to-end command-line workflows, exit codes and determinism."""

import filecmp
import os

import numpy as np
import pytest

from gpvalid.cli import main
from gpvalid.outputs import read_dataset_csv, read_model_file

FAST_OVERRIDES = [
    "--grid-size", "64",
    "--n-train", "10",
    "--n-test", "16",
    "--restarts", "1",
    "--posterior-n-a", "60",
    "--posterior-n-b", "60",
    "--train-mode", "fix_at_truth",
]


def run_cli(*argv):
    return main(list(argv))


class TestGenerate:
    def test_writes_datasets(self, tmp_path):
        out = tmp_path / "gen"
        code = run_cli("generate", "--output-dir", str(out), *FAST_OVERRIDES)
        assert code == 0
        train = read_dataset_csv(out / "train.csv")
        test = read_dataset_csv(out / "test.csv")
        assert len(train) == 10 and len(test) == 16
        truth_lines = [
            l for l in (out / "truth.csv").read_text().splitlines()
            if l and not l.startswith("#")
        ]
        assert truth_lines[0] == "x,f"
        assert len(truth_lines) == 1 + 64

    def test_config_file_plus_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "grid_size = 64\nn_train = 5\nn_test = 8\n"
            "train_mode = fix_at_truth\n"
            "posterior_n_a = 60\nposterior_n_b = 60\n"
        )
        out = tmp_path / "gen"
        code = run_cli("generate", "--config", str(cfg),
                       "--output-dir", str(out), "--n-train", "7")
        assert code == 0
        assert len(read_dataset_csv(out / "train.csv")) == 7


class TestFitAndValidate:
    def test_full_workflow(self, tmp_path):
        out = tmp_path / "gen"
        assert run_cli("generate", "--output-dir", str(out), "--n-train", "30",
                       "--grid-size", "128", "--n-test", "16",
                       "--posterior-n-a", "60", "--posterior-n-b", "60") == 0
        model_path = tmp_path / "model.txt"
        assert run_cli(
            "fit", "--dataset", str(out / "train.csv"), "--kernel", "matern15",
            "--restarts", "2", "--out", str(model_path),
        ) == 0
        kernel, mean = read_model_file(model_path)
        assert kernel.signal_variance > 0

        val_dir = tmp_path / "val"
        assert run_cli(
            "validate", "--train", str(out / "train.csv"),
            "--test", str(out / "test.csv"), "--model", str(model_path),
            "--out-dir", str(val_dir),
        ) == 0
        for name in ("report.txt", "pk_histogram.csv", "posterior.csv",
                     "posterior.svg"):
            assert (val_dir / name).exists()


class TestRun:
    def test_persists_replicates_and_summary(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("run", "--output-dir", str(out), "--n-replicates", "2",
                       *FAST_OVERRIDES)
        assert code == 0
        assert (out / "summary.csv").exists()
        assert (out / "resolved_config.txt").exists()
        for rep in ("rep_0000", "rep_0001"):
            for name in ("train.csv", "test.csv", "truth.csv", "model.txt",
                         "report.txt", "pk_histogram.csv", "posterior.csv",
                         "posterior.svg", "fit.svg"):
                assert (out / rep / name).exists(), f"{rep}/{name}"

    def test_no_plots_flag(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli("run", "--output-dir", str(out), "--emit-plots", "false",
                       *FAST_OVERRIDES)
        assert code == 0
        assert not (out / "rep_0000" / "fit.svg").exists()
        assert (out / "rep_0000" / "posterior.svg").exists()

    def test_byte_identical_given_seed(self, tmp_path, monkeypatch):
        # identical relative output dirs under two working directories:
        # every artifact except the timestamp file matches byte for byte
        for sub in ("one", "two"):
            workdir = tmp_path / sub
            workdir.mkdir()
            monkeypatch.chdir(workdir)
            assert run_cli("run", "--output-dir", "out", "--n-replicates", "2",
                           "--rng-seed", "11", *FAST_OVERRIDES) == 0
        a, b = tmp_path / "one" / "out", tmp_path / "two" / "out"
        for root, _, files in os.walk(a):
            rel = os.path.relpath(root, a)
            for name in files:
                if name == "metadata.txt":
                    continue
                pa = os.path.join(root, name)
                pb = os.path.join(b, rel, name)
                assert filecmp.cmp(pa, pb, shallow=False), f"{rel}/{name}"

    def test_parallel_matches_serial(self, tmp_path):
        serial, parallel = tmp_path / "s", tmp_path / "p"
        for out, workers in ((serial, "1"), (parallel, "2")):
            assert run_cli("replicate-study", "--output-dir", str(out),
                           "--n-replicates", "4", "--workers", workers,
                           "--rng-seed", "5", *FAST_OVERRIDES) == 0
        strip = lambda p: [
            l for l in open(p).read().splitlines()
            if not l.startswith("# output_dir") and not l.startswith("# workers")
        ]
        assert strip(serial / "summary.csv") == strip(parallel / "summary.csv")


class TestReplicateStudy:
    def test_summary_only(self, tmp_path):
        out = tmp_path / "study"
        code = run_cli("replicate-study", "--output-dir", str(out),
                       "--n-replicates", "3", *FAST_OVERRIDES)
        assert code == 0
        rows = [
            l for l in (out / "summary.csv").read_text().splitlines()
            if l and not l.startswith("#")
        ]
        assert rows[0].startswith("seed,mahalanobis,dof,p_value")
        assert len(rows) == 4
        assert not (out / "rep_0000").exists()

    def test_summary_parses_numerically(self, tmp_path):
        out = tmp_path / "study"
        run_cli("replicate-study", "--output-dir", str(out),
                "--n-replicates", "3", "--rng-seed", "2", *FAST_OVERRIDES)
        rows = [
            l.split(",") for l in (out / "summary.csv").read_text().splitlines()
            if l and not l.startswith("#")
        ][1:]
        for row in rows:
            assert row[8] == "ok"
            assert np.isfinite(float(row[3]))
            assert 0.0 <= float(row[6]) <= 1.0


class TestExitCodes:
    def test_unknown_config_key_is_usage_error(self, tmp_path, capsys):
        assert run_cli("run", "--not-a-key", "3") == 1
        assert "error" in capsys.readouterr().err

    def test_bad_value_is_usage_error(self):
        assert run_cli("run", "--n-train", "not_an_int") == 1

    def test_missing_dataset_is_io_error(self, tmp_path):
        assert run_cli(
            "fit", "--dataset", str(tmp_path / "absent.csv"),
            "--kernel", "rbf", "--out", str(tmp_path / "m.txt"),
        ) == 3

    def test_numerical_failure(self, tmp_path):
        # duplicate zero-noise training points cannot be factorized
        train = tmp_path / "train.csv"
        train.write_text("x,f,noise_sd\n0.5,1.0,0.0\n0.5,1.0,0.0\n")
        test = tmp_path / "test.csv"
        test.write_text("x,f,noise_sd\n0.1,0.0,0.1\n0.9,0.0,0.1\n")
        model = tmp_path / "model.txt"
        model.write_text(
            "kernel_family = rbf\nsignal_variance = 1.0\n"
            "length_scale = 0.3\nmean_constant = 0.0\n"
        )
        assert run_cli("validate", "--train", str(train), "--test", str(test),
                       "--model", str(model), "--out-dir", str(tmp_path / "v")) == 2

    def test_odd_override_arguments(self):
        assert run_cli("run", "--n-train") == 1
