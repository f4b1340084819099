"""File outputs: dataset/model/report serialization, histogram and
posterior CSVs, and SVG plots.

All writers are deterministic: floats are serialized with shortest
round-trip repr, matplotlib SVGs use a fixed hash salt and carry no
date metadata.  Resolved-config lines may be embedded in any file as
``# key = value`` comments.
"""

import math

import numpy as np

from .errors import GPValidError, InvalidSpecError, UnsupportedPlotError
from .gp import Dataset, FittedGP, predict
from .kernels import KernelSpec, MeanSpec
from .validation import BetaPosterior, ValidationReport

PK_HISTOGRAM_BINS = 10
SVG_HASHSALT = "gpvalid"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _config_comments(config_lines):
    if not config_lines:
        return ""
    return "".join(f"# {line}\n" for line in config_lines)


# ---------------------------------------------------------------------------
# dataset and model files


def write_dataset_csv(path, dataset: Dataset, config_lines=None):
    """CSV with header x, f, noise_sd (1-D inputs only)."""
    if dataset.inputs.shape[1] != 1:
        raise InvalidSpecError("dataset files support 1-D inputs only")
    with open(path, "w") as fh:
        fh.write(_config_comments(config_lines))
        fh.write("x,f,noise_sd\n")
        for x, f, nv in zip(
            dataset.inputs[:, 0], dataset.values, dataset.noise_variances
        ):
            fh.write(f"{_fmt(x)},{_fmt(f)},{_fmt(math.sqrt(nv))}\n")


def read_dataset_csv(path) -> Dataset:
    xs, fs, sds = [], [], []
    with open(path) as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "x,f,noise_sd":
                    raise GPValidError(
                        f"{path}: expected header 'x,f,noise_sd', got {line!r}"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            xs.append(float(parts[0]))
            fs.append(float(parts[1]))
            sds.append(float(parts[2]))
    return Dataset(np.array(xs)[:, None], np.array(fs), np.array(sds) ** 2)


def write_model_file(path, kernel: KernelSpec, mean: MeanSpec, config_lines=None,
                     log_likelihood=None):
    with open(path, "w") as fh:
        fh.write(_config_comments(config_lines))
        fh.write(f"kernel_family = {kernel.family.value}\n")
        fh.write(f"signal_variance = {_fmt(kernel.signal_variance)}\n")
        fh.write(f"length_scale = {_fmt(kernel.length_scale)}\n")
        fh.write(f"mean_constant = {_fmt(mean.constant)}\n")
        if log_likelihood is not None:
            fh.write(f"log_likelihood = {_fmt(log_likelihood)}\n")


def read_model_file(path):
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        kernel = KernelSpec(
            fields["kernel_family"],
            float(fields["signal_variance"]),
            float(fields["length_scale"]),
        )
        mean = MeanSpec(float(fields["mean_constant"]))
    except KeyError as exc:
        raise GPValidError(f"{path}: missing model field {exc}") from exc
    return kernel, mean


# ---------------------------------------------------------------------------
# validation report


def write_report(path, report: ValidationReport, config_lines=None):
    """Structured text mirroring the validation report fields."""
    with open(path, "w") as fh:
        fh.write(_config_comments(config_lines))
        fh.write("[summary]\n")
        fh.write(f"mahalanobis = {_fmt(report.mahalanobis)}\n")
        fh.write(f"dof = {report.dof}\n")
        fh.write(f"p_value = {_fmt(report.p_value)}\n")
        fh.write(f"beta_a_hat = {_fmt(report.beta_fit.a_hat)}\n")
        fh.write(f"beta_b_hat = {_fmt(report.beta_fit.b_hat)}\n")
        fh.write(
            f"beta_max_log_likelihood = {_fmt(report.beta_fit.max_log_likelihood)}\n"
        )
        fh.write(f"beta_converged = {_fmt(report.beta_fit.converged)}\n")
        fh.write(f"beta_degenerate = {_fmt(report.beta_fit.degenerate)}\n")
        fh.write(f"uniform_coverage = {_fmt(report.uniform_coverage)}\n")
        fh.write(f"n_dropped_modes = {report.residuals.n_dropped}\n")
        fh.write("[residuals]\n")
        fh.write("k,eigenvalue,rotated,standardized,survival\n")
        res = report.residuals
        for k in range(res.standardized.size):
            fh.write(
                f"{k},{_fmt(res.eigenvalues[k])},{_fmt(res.rotated_residuals[k])},"
                f"{_fmt(res.standardized[k])},{_fmt(res.survival_probs[k])}\n"
            )


# ---------------------------------------------------------------------------
# histogram and posterior CSVs


def pk_histogram(survival_probs, n_bins=PK_HISTOGRAM_BINS):
    """Density-normalized histogram of survival probabilities on [0, 1].

    Bins are half-open [left, right) except the last, which is closed.
    For reporting only; inference always uses the unbinned values.
    """
    p = np.asarray(survival_probs, dtype=float).ravel()
    if p.size == 0:
        raise InvalidSpecError("cannot histogram an empty survival vector")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts, _ = np.histogram(p, bins=edges)
    density = counts / (p.size * (1.0 / n_bins))
    return edges, density


def emit_pk_histogram(report: ValidationReport, path, config_lines=None):
    """CSV with columns bin_left, bin_right, density."""
    edges, density = pk_histogram(report.residuals.survival_probs)
    with open(path, "w") as fh:
        fh.write(_config_comments(config_lines))
        fh.write("bin_left,bin_right,density\n")
        for left, right, dens in zip(edges[:-1], edges[1:], density):
            fh.write(f"{_fmt(left)},{_fmt(right)},{_fmt(dens)}\n")


def hdr_levels(posterior: BetaPosterior, targets=(0.683, 0.955)):
    """Density levels whose superlevel sets enclose the target masses.

    Returns a list of (target, level, enclosed_mass); levels are None for
    a flat posterior, where no contour is defined.
    """
    mass = posterior.cell_mass.ravel()
    logd = posterior.log_density.ravel()
    if float(np.ptp(logd)) < 1e-12:
        return [(t, None, None) for t in targets]
    order = np.argsort(logd)[::-1]
    csum = np.cumsum(mass[order])
    out = []
    for t in targets:
        idx = int(np.searchsorted(csum, t))
        idx = min(idx, csum.size - 1)
        out.append((t, float(logd[order[idx]]), float(csum[idx])))
    return out


def emit_posterior_heatmap(posterior: BetaPosterior, base_path, mle=None,
                           config_lines=None):
    """Persist a posterior as ``<base>.csv`` (a, b, density rows in grid
    order) and ``<base>.svg`` (heatmap with '+' at (1,1), a dot at the
    MLE and 68.3% / 95.5% highest-density contours)."""
    base = str(base_path)
    if base.endswith(".csv") or base.endswith(".svg"):
        base = base[:-4]
    csv_path, svg_path = base + ".csv", base + ".svg"

    # cell-area-normalized density for the CSV
    da = posterior.a_edges[1] - posterior.a_edges[0]
    db = posterior.b_edges[1] - posterior.b_edges[0]
    density = posterior.cell_mass / (da * db)
    with open(csv_path, "w") as fh:
        fh.write(_config_comments(config_lines))
        fh.write("a,b,density\n")
        for i, a in enumerate(posterior.a_grid):
            for j, b in enumerate(posterior.b_grid):
                fh.write(f"{_fmt(a)},{_fmt(b)},{_fmt(density[i, j])}\n")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = SVG_HASHSALT
    fig, ax = plt.subplots(figsize=(6, 5))
    extent = (
        posterior.b_edges[0],
        posterior.b_edges[-1],
        posterior.a_edges[0],
        posterior.a_edges[-1],
    )
    ax.imshow(density, origin="lower", extent=extent, aspect="auto",
              cmap="viridis")
    levels = hdr_levels(posterior)
    if any(level is None for _, level, _ in levels):
        ax.annotate("flat posterior: no contours", (0.05, 0.95),
                    xycoords="axes fraction", color="white")
    else:
        log_levels = sorted(level for _, level, _ in levels)
        B, A = np.meshgrid(posterior.b_grid, posterior.a_grid)
        cs = ax.contour(B, A, posterior.log_density, levels=log_levels,
                        colors="yellow")
        cs.set_gid("hdr_contours")
    if mle is not None:
        ax.plot([mle[1]], [mle[0]], "ro", gid="beta_mle")
    else:
        i, j = np.unravel_index(np.argmax(posterior.log_density),
                                posterior.log_density.shape)
        ax.plot([posterior.b_grid[j]], [posterior.a_grid[i]], "ro",
                gid="beta_mle")
    ax.plot([1.0], [1.0], "w+", markersize=12, gid="uniform_point")
    ax.set_xlabel("b")
    ax.set_ylabel("a")
    ax.set_title("Beta-parameter posterior")
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return csv_path, svg_path


def emit_fit_plot(model: FittedGP, truth, train: Dataset, test: Dataset, path,
                  config_lines=None, n_curve=400):
    """SVG of the fit: truth curve (dashed), predictive mean (solid),
    mean +- 2 sd band, train points with error bars and test points."""
    if model.training_data.inputs.shape[1] != 1:
        raise UnsupportedPlotError("fit plots support 1-D inputs only")
    grid, truth_values = truth
    grid = np.asarray(grid, dtype=float).reshape(-1)
    truth_values = np.asarray(truth_values, dtype=float).reshape(-1)

    lo = min(grid.min(), train.inputs[:, 0].min(), test.inputs[:, 0].min())
    hi = max(grid.max(), train.inputs[:, 0].max(), test.inputs[:, 0].max())
    xs = np.linspace(lo, hi, n_curve)
    pred = predict(model, xs[:, None])
    sd = np.sqrt(np.maximum(np.diag(pred.covariance), 0.0))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = SVG_HASHSALT
    fig, ax = plt.subplots(figsize=(8, 5))
    band = ax.fill_between(xs, pred.mean - 2 * sd, pred.mean + 2 * sd,
                           color="cyan", alpha=0.4, label="2-sd band")
    band.set_gid("credible_band")
    (mean_line,) = ax.plot(xs, pred.mean, "c-", label="predictive mean")
    mean_line.set_gid("predictive_mean")
    (truth_line,) = ax.plot(grid, truth_values, "b--", label="truth")
    truth_line.set_gid("truth")
    eb = ax.errorbar(
        train.inputs[:, 0], train.values,
        yerr=np.sqrt(train.noise_variances),
        fmt="ro", markersize=4, label="train",
    )
    eb[0].set_gid("train_points")
    (test_pts,) = ax.plot(test.inputs[:, 0], test.values, "y.", label="test")
    test_pts.set_gid("test_points")
    ax.set_xlabel("x")
    ax.set_ylabel("f(x)")
    ax.legend(loc="best")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
