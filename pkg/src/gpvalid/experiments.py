"""Config-driven experiment runner: synthesize a truth function, fit a
candidate kernel, validate its predictions on held-out points, and
persist everything.

One important modeling detail lives here rather than in the validation
module: held-out observations are *noisy*, so the distribution they are
tested against is N(mean, predictive covariance + test-noise diagonal).
Without that diagonal the calibration study of a perfectly specified
model would not be chi-squared distributed.
"""

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import gp, outputs, synth
from .errors import GPValidError, InvalidSpecError
from .kernels import KernelSpec, MeanSpec, parse_family
from .validation import GridConfig, ValidationReport, validate

TRAIN_MODES = ("train_mle", "fix_at_truth", "fix_explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    truth_kernel: str = "matern15"
    truth_signal_variance: float = 1.0
    truth_length_scale: float = 0.1
    truth_mean: float = 0.0
    noise_sd: float = 0.05
    n_train: int = 40
    n_test: int = 80
    domain_min: float = 0.0
    domain_max: float = 1.0
    grid_size: int = 512
    candidate_kernel: str = "rbf"
    train_mode: str = "train_mle"
    fixed_signal_variance: float = 1.0
    fixed_length_scale: float = 0.1
    restarts: int = 3
    rng_seed: int = 0
    n_replicates: int = 1
    posterior_a_min: float = 0.05
    posterior_a_max: float = 3.0
    posterior_b_min: float = 0.05
    posterior_b_max: float = 3.0
    posterior_n_a: int = 300
    posterior_n_b: int = 300
    output_dir: str = "gpvalid_out"
    workers: int = 1
    emit_plots: bool = True

    def __post_init__(self):
        parse_family(self.truth_kernel)
        parse_family(self.candidate_kernel)
        if self.train_mode not in TRAIN_MODES:
            raise InvalidSpecError(
                f"train_mode must be one of {TRAIN_MODES}, got {self.train_mode!r}"
            )
        if self.n_test < 2 or self.n_train < 1 or self.n_replicates < 1:
            raise InvalidSpecError(
                "need n_test >= 2, n_train >= 1, n_replicates >= 1"
            )
        if not self.domain_min < self.domain_max:
            raise InvalidSpecError("domain_min must be below domain_max")
        if self.restarts < 1 or self.workers < 1:
            raise InvalidSpecError("restarts and workers must be >= 1")

    def grid_config(self) -> GridConfig:
        return GridConfig(
            a_min=self.posterior_a_min,
            a_max=self.posterior_a_max,
            b_min=self.posterior_b_min,
            b_max=self.posterior_b_max,
            n_a=self.posterior_n_a,
            n_b=self.posterior_n_b,
        )

    def resolved_lines(self):
        """Every field, including defaulted ones, as 'key = value' lines."""
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {outputs._fmt(getattr(self, f.name))}")
        return lines


_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False,
                 "yes": True, "no": False}


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        key = raw.strip().lower()
        if key not in _BOOL_STRINGS:
            raise InvalidSpecError(f"{field.name}: expected a boolean, got {raw!r}")
        return _BOOL_STRINGS[key]
    try:
        if field.type in ("int", int):
            return int(raw)
        if field.type in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise InvalidSpecError(f"{field.name}: {exc}") from exc
    return raw.strip()


def config_from_mapping(mapping) -> ExperimentConfig:
    """Build a config from string keys/values; unknown keys are errors."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, raw in mapping.items():
        if key not in fields:
            raise InvalidSpecError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(fields[key], str(raw))
    return ExperimentConfig(**kwargs)


def parse_config_file(path):
    """Flat 'key = value' text file; '#' starts a comment."""
    mapping = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidSpecError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            mapping[key.strip()] = value.strip()
    return mapping


@dataclass(frozen=True)
class ReplicateResult:
    seed: int
    mahalanobis: float = float("nan")
    dof: int = 0
    p_value: float = float("nan")
    a_hat: float = float("nan")
    b_hat: float = float("nan")
    uniform_coverage: float = float("nan")
    train_log_likelihood: float = float("nan")
    ok: bool = True
    error: str = ""


def _candidate_model(config: ExperimentConfig, experiment, seed):
    mean = MeanSpec(config.truth_mean)
    if config.train_mode == "train_mle":
        result = gp.train(
            config.candidate_kernel, mean, experiment.train_set,
            restarts=config.restarts, rng_seed=seed,
        )
        return result.kernel, mean, result.log_likelihood
    if config.train_mode == "fix_at_truth":
        spec = KernelSpec(
            config.candidate_kernel,
            config.truth_signal_variance,
            config.truth_length_scale,
        )
    else:  # fix_explicit
        spec = KernelSpec(
            config.candidate_kernel,
            config.fixed_signal_variance,
            config.fixed_length_scale,
        )
    ll = gp.log_marginal_likelihood(spec, mean, experiment.train_set)
    return spec, mean, ll


def run_replicate(config: ExperimentConfig, replicate_index: int):
    """Run one replicate; returns (result, artifacts) where artifacts
    holds the in-memory objects needed for persistence."""
    seed = config.rng_seed + replicate_index
    truth_kernel = KernelSpec(
        config.truth_kernel,
        config.truth_signal_variance,
        config.truth_length_scale,
    )
    experiment = synth.generate_experiment(
        truth_kernel,
        MeanSpec(config.truth_mean),
        config.n_train,
        config.n_test,
        config.noise_sd,
        rng_seed=seed,
        domain=(config.domain_min, config.domain_max),
        grid_size=config.grid_size,
    )
    kernel, mean, train_ll = _candidate_model(config, experiment, seed)
    model = gp.fit(kernel, mean, experiment.train_set)
    prediction = gp.predict(model, experiment.test_set.inputs)
    noisy_prediction = prediction.with_added_noise(
        experiment.test_set.noise_variances
    )
    report = validate(
        noisy_prediction, experiment.test_set.values, config.grid_config()
    )
    result = ReplicateResult(
        seed=seed,
        mahalanobis=report.mahalanobis,
        dof=report.dof,
        p_value=report.p_value,
        a_hat=report.beta_fit.a_hat,
        b_hat=report.beta_fit.b_hat,
        uniform_coverage=report.uniform_coverage,
        train_log_likelihood=train_ll,
    )
    artifacts = {
        "experiment": experiment,
        "kernel": kernel,
        "mean": mean,
        "model": model,
        "report": report,
        "train_log_likelihood": train_ll,
    }
    return result, artifacts


def _replicate_worker(args):
    config, index, persist = args
    try:
        result, artifacts = run_replicate(config, index)
    except GPValidError as exc:
        return ReplicateResult(
            seed=config.rng_seed + index, ok=False,
            error=f"{type(exc).__name__}: {exc}",
        )
    if persist:
        _persist_replicate(config, index, artifacts)
    return result


def _persist_replicate(config: ExperimentConfig, index: int, artifacts):
    lines = config.resolved_lines() + [f"replicate_index = {index}"]
    rep_dir = os.path.join(config.output_dir, f"rep_{index:04d}")
    os.makedirs(rep_dir, exist_ok=True)
    experiment = artifacts["experiment"]
    outputs.write_dataset_csv(
        os.path.join(rep_dir, "train.csv"), experiment.train_set, lines
    )
    outputs.write_dataset_csv(
        os.path.join(rep_dir, "test.csv"), experiment.test_set, lines
    )
    with open(os.path.join(rep_dir, "truth.csv"), "w") as fh:
        fh.write(outputs._config_comments(lines))
        fh.write("x,f\n")
        for x, f in zip(experiment.grid[:, 0], experiment.truth_values):
            fh.write(f"{outputs._fmt(x)},{outputs._fmt(f)}\n")
    outputs.write_model_file(
        os.path.join(rep_dir, "model.txt"),
        artifacts["kernel"], artifacts["mean"], lines,
        log_likelihood=artifacts["train_log_likelihood"],
    )
    report: ValidationReport = artifacts["report"]
    outputs.write_report(os.path.join(rep_dir, "report.txt"), report, lines)
    outputs.emit_pk_histogram(
        report, os.path.join(rep_dir, "pk_histogram.csv"), lines
    )
    outputs.emit_posterior_heatmap(
        report.posterior, os.path.join(rep_dir, "posterior"),
        mle=(report.beta_fit.a_hat, report.beta_fit.b_hat),
        config_lines=lines,
    )
    if config.emit_plots:
        outputs.emit_fit_plot(
            artifacts["model"],
            (experiment.grid[:, 0], experiment.truth_values),
            experiment.train_set,
            experiment.test_set,
            os.path.join(rep_dir, "fit.svg"),
            config_lines=lines,
        )


SUMMARY_COLUMNS = (
    "seed,mahalanobis,dof,p_value,a_hat,b_hat,uniform_coverage,"
    "train_log_likelihood,status,error"
)


def write_summary_csv(path, results, config_lines=None):
    with open(path, "w") as fh:
        fh.write(outputs._config_comments(config_lines))
        fh.write(SUMMARY_COLUMNS + "\n")
        for r in results:
            status = "ok" if r.ok else "failed"
            err = r.error.replace(",", ";").replace("\n", " ")
            fh.write(
                f"{r.seed},{outputs._fmt(r.mahalanobis)},{r.dof},"
                f"{outputs._fmt(r.p_value)},{outputs._fmt(r.a_hat)},"
                f"{outputs._fmt(r.b_hat)},{outputs._fmt(r.uniform_coverage)},"
                f"{outputs._fmt(r.train_log_likelihood)},{status},{err}\n"
            )


def run_experiment(config: ExperimentConfig, persist=True, summary_only=False):
    """Run all replicates, persist artifacts, and return the results.

    Failed replicates are recorded in the summary and do not abort the
    run; callers should treat a majority of failures as fatal (the CLI
    exits with code 2).
    """
    if persist:
        os.makedirs(config.output_dir, exist_ok=True)
    per_replicate = persist and not summary_only
    tasks = [(config, i, per_replicate) for i in range(config.n_replicates)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_replicate_worker, tasks))
    else:
        results = [_replicate_worker(t) for t in tasks]
    if persist:
        lines = config.resolved_lines()
        with open(os.path.join(config.output_dir, "resolved_config.txt"), "w") as fh:
            for line in lines:
                fh.write(line + "\n")
        write_summary_csv(
            os.path.join(config.output_dir, "summary.csv"), results, lines
        )
        import datetime

        with open(os.path.join(config.output_dir, "metadata.txt"), "w") as fh:
            fh.write(f"finished_at = {datetime.datetime.now().isoformat()}\n")
    return results
