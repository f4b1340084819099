"""Serialization, histogram/posterior emission and plot structure."""

import numpy as np
import pytest

from gpvalid.errors import InvalidSpecError
from gpvalid.gp import Dataset, fit
from gpvalid.kernels import KernelSpec, MeanSpec
from gpvalid.outputs import (
    emit_fit_plot,
    emit_pk_histogram,
    emit_posterior_heatmap,
    hdr_levels,
    pk_histogram,
    read_dataset_csv,
    read_model_file,
    write_dataset_csv,
    write_model_file,
    write_report,
)
from gpvalid.validation import BetaPosterior, beta_posterior, validate
from gpvalid.gp import Prediction, predict


def sample_dataset(rng, n=7):
    x = np.sort(rng.uniform(0, 1, size=n))[:, None]
    return Dataset(x, rng.standard_normal(n), np.full(n, 0.05**2))


def sample_report(rng, n=30):
    A = rng.standard_normal((n, n))
    cov = A @ A.T + 0.5 * np.eye(n)
    pred = Prediction(rng.standard_normal(n), cov)
    L = np.linalg.cholesky(cov)
    obs = pred.mean + L @ rng.standard_normal(n)
    return validate(pred, obs)


class TestDatasetCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = sample_dataset(rng)
        path = tmp_path / "d.csv"
        write_dataset_csv(path, data)
        back = read_dataset_csv(path)
        np.testing.assert_array_equal(back.inputs, data.inputs)
        np.testing.assert_array_equal(back.values, data.values)
        np.testing.assert_allclose(back.noise_variances, data.noise_variances,
                                   rtol=1e-15)

    def test_header_and_comments(self, tmp_path):
        rng = np.random.default_rng(1)
        path = tmp_path / "d.csv"
        write_dataset_csv(path, sample_dataset(rng), ["alpha = 1", "beta = x"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# alpha = 1"
        assert lines[1] == "# beta = x"
        assert lines[2] == "x,f,noise_sd"

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(2)
        data = sample_dataset(rng)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_dataset_csv(p1, data)
        write_dataset_csv(p2, data)
        assert p1.read_bytes() == p2.read_bytes()


class TestModelFile:
    def test_round_trip(self, tmp_path):
        kernel = KernelSpec("matern25", 1.2345678901234, 0.0987654321)
        mean = MeanSpec(0.25)
        path = tmp_path / "m.txt"
        write_model_file(path, kernel, mean, log_likelihood=-12.5)
        back_kernel, back_mean = read_model_file(path)
        assert back_kernel == kernel
        assert back_mean.constant == mean.constant

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("kernel_family = rbf\n")
        from gpvalid.errors import GPValidError

        with pytest.raises(GPValidError):
            read_model_file(path)


class TestReport:
    def test_sections_and_keys(self, tmp_path):
        rng = np.random.default_rng(3)
        report = sample_report(rng)
        path = tmp_path / "r.txt"
        write_report(path, report)
        text = path.read_text()
        assert "[summary]" in text and "[residuals]" in text
        for key in ("mahalanobis", "dof", "p_value", "beta_a_hat",
                    "uniform_coverage", "n_dropped_modes"):
            assert f"{key} = " in text
        # one residual row per retained mode
        rows = text.split("[residuals]")[1].strip().splitlines()
        assert rows[0] == "k,eigenvalue,rotated,standardized,survival"
        assert len(rows) - 1 == report.dof

    def test_values_round_trip_through_repr(self, tmp_path):
        rng = np.random.default_rng(4)
        report = sample_report(rng)
        path = tmp_path / "r.txt"
        write_report(path, report)
        for line in path.read_text().splitlines():
            if line.startswith("mahalanobis = "):
                assert float(line.split(" = ")[1]) == report.mahalanobis


class TestPkHistogram:
    def test_all_half_in_single_bin(self):
        edges, density = pk_histogram(np.full(25, 0.5))
        assert density[5] == pytest.approx(10.0)
        assert np.all(density[np.arange(10) != 5] == 0.0)

    def test_counting_oracle(self):
        rng = np.random.default_rng(5)
        p = rng.uniform(size=1000)
        edges, density = pk_histogram(p)
        for k in range(10):
            left, right = k / 10, (k + 1) / 10
            if k < 9:
                count = np.sum((p >= left) & (p < right))
            else:
                count = np.sum((p >= left) & (p <= right))
            assert density[k] == pytest.approx(count / (1000 * 0.1))

    def test_density_integrates_to_one(self):
        rng = np.random.default_rng(6)
        _, density = pk_histogram(rng.uniform(size=333))
        assert float(np.sum(density) * 0.1) == pytest.approx(1.0, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidSpecError):
            pk_histogram([])

    def test_emit_csv(self, tmp_path):
        rng = np.random.default_rng(7)
        report = sample_report(rng)
        path = tmp_path / "h.csv"
        emit_pk_histogram(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,density"
        assert len(lines) == 11


class TestHdrLevels:
    def test_superlevel_masses_match_targets(self):
        rng = np.random.default_rng(8)
        post = beta_posterior(rng.beta(1.3, 0.8, size=500))
        for target, level, enclosed in hdr_levels(post):
            assert level is not None
            mass = float(np.sum(post.cell_mass[post.log_density >= level]))
            # grid discretization bounds how close the HDR can land
            assert abs(mass - target) < 0.005
            assert enclosed >= target

    def test_flat_posterior_has_no_levels(self):
        flat = BetaPosterior(
            a_grid=np.array([0.5, 1.5]),
            b_grid=np.array([0.5, 1.5]),
            a_edges=np.array([0.0, 1.0, 2.0]),
            b_edges=np.array([0.0, 1.0, 2.0]),
            log_density=np.zeros((2, 2)),
            cell_mass=np.full((2, 2), 0.25),
        )
        assert all(level is None for _, level, _ in hdr_levels(flat))


class TestPosteriorHeatmap:
    def test_emits_csv_and_svg(self, tmp_path):
        rng = np.random.default_rng(9)
        post = beta_posterior(rng.uniform(size=80))
        csv_path, svg_path = emit_posterior_heatmap(post, tmp_path / "post")
        body = open(svg_path).read()
        assert "hdr_contours" in body
        assert "beta_mle" in body
        assert "uniform_point" in body
        lines = open(csv_path).read().splitlines()
        assert lines[0] == "a,b,density"
        assert len(lines) == 1 + post.a_grid.size * post.b_grid.size

    def test_csv_density_integrates_to_one(self, tmp_path):
        rng = np.random.default_rng(10)
        post = beta_posterior(rng.uniform(size=60))
        csv_path, _ = emit_posterior_heatmap(post, tmp_path / "post")
        dens = np.array(
            [float(l.split(",")[2]) for l in open(csv_path).read().splitlines()[1:]]
        )
        da = post.a_edges[1] - post.a_edges[0]
        db = post.b_edges[1] - post.b_edges[0]
        assert float(dens.sum() * da * db) == pytest.approx(1.0, abs=1e-10)

    def test_flat_posterior_annotated(self, tmp_path):
        flat = BetaPosterior(
            a_grid=np.array([0.5, 1.5]),
            b_grid=np.array([0.5, 1.5]),
            a_edges=np.array([0.0, 1.0, 2.0]),
            b_edges=np.array([0.0, 1.0, 2.0]),
            log_density=np.zeros((2, 2)),
            cell_mass=np.full((2, 2), 0.25),
        )
        _, svg_path = emit_posterior_heatmap(flat, tmp_path / "flat", mle=(1.0, 1.0))
        body = open(svg_path).read()
        assert "flat posterior: no contours" in body
        assert "hdr_contours" not in body

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(11)
        post = beta_posterior(rng.uniform(size=40))
        _, svg1 = emit_posterior_heatmap(post, tmp_path / "a")
        _, svg2 = emit_posterior_heatmap(post, tmp_path / "b")
        assert open(svg1, "rb").read() == open(svg2, "rb").read()


class TestFitPlot:
    def make_model_and_sets(self):
        rng = np.random.default_rng(12)
        kernel = KernelSpec("rbf", 1.0, 0.3)
        mean = MeanSpec(0.0)
        x = np.linspace(0.1, 0.9, 6)[:, None]
        f = np.sin(4 * x[:, 0])
        train = Dataset(x, f, np.zeros(6))
        test = Dataset(
            rng.uniform(0.1, 0.9, size=(5, 1)), rng.standard_normal(5),
            np.full(5, 0.01),
        )
        grid = np.linspace(0, 1, 50)
        truth = np.sin(4 * grid)
        return fit(kernel, mean, train), (grid, truth), train, test

    def test_svg_structure(self, tmp_path):
        model, truth, train, test = self.make_model_and_sets()
        path = tmp_path / "fit.svg"
        emit_fit_plot(model, truth, train, test, path)
        body = path.read_text()
        for gid in ("credible_band", "predictive_mean", "truth",
                    "train_points", "test_points"):
            assert gid in body

    def test_band_pinches_at_noiseless_training_points(self, tmp_path):
        model, truth, train, test = self.make_model_and_sets()
        pred = predict(model, train.inputs)
        sd = np.sqrt(np.maximum(np.diag(pred.covariance), 0.0))
        assert np.all(sd < 1e-3)
        far = predict(model, [[30.0]])
        assert float(np.sqrt(far.covariance[0, 0])) == pytest.approx(1.0, rel=0.02)
