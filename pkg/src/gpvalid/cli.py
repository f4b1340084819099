"""Command-line interface.

Subcommands:
    generate         synthesize a truth function and persist train/test sets
    fit              train a kernel on a dataset file, write a model file
    validate         dataset + model -> validation report and CSVs
    run              full experiment (replicates, reports, plots, summary)
    replicate-study  many seeds -> summary CSV only

Experiment settings come from a flat ``key = value`` config file plus
``--key value`` command-line overrides; unknown keys are errors.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure in a
majority of replicates, 3 I/O error.
"""

import argparse
import os
import sys

import numpy as np

from . import experiments, gp, outputs
from .errors import GPValidError, InvalidSpecError
from .kernels import MeanSpec
from .validation import validate as run_validation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _config_from_args(args, extra):
    mapping = {}
    if args.config:
        mapping.update(experiments.parse_config_file(args.config))
    if len(extra) % 2 != 0:
        raise InvalidSpecError(
            f"override arguments must come in '--key value' pairs, got {extra}"
        )
    for flag, value in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise InvalidSpecError(f"expected an override flag, got {flag!r}")
        mapping[flag[2:].replace("-", "_")] = value
    return experiments.config_from_mapping(mapping)


def _cmd_generate(args, extra):
    config = _config_from_args(args, extra)
    result, artifacts = experiments.run_replicate(config, 0)
    os.makedirs(config.output_dir, exist_ok=True)
    lines = config.resolved_lines()
    experiment = artifacts["experiment"]
    outputs.write_dataset_csv(
        os.path.join(config.output_dir, "train.csv"), experiment.train_set, lines
    )
    outputs.write_dataset_csv(
        os.path.join(config.output_dir, "test.csv"), experiment.test_set, lines
    )
    with open(os.path.join(config.output_dir, "truth.csv"), "w") as fh:
        fh.write(outputs._config_comments(lines))
        fh.write("x,f\n")
        for x, f in zip(experiment.grid[:, 0], experiment.truth_values):
            fh.write(f"{outputs._fmt(x)},{outputs._fmt(f)}\n")
    print(f"wrote train/test/truth CSVs to {config.output_dir}")
    return EXIT_OK


def _cmd_fit(args, extra):
    if extra:
        raise InvalidSpecError(f"unexpected arguments: {extra}")
    data = outputs.read_dataset_csv(args.dataset)
    mean = MeanSpec(args.mean)
    result = gp.train(
        args.kernel, mean, data, restarts=args.restarts, rng_seed=args.rng_seed
    )
    outputs.write_model_file(
        args.out, result.kernel, mean, log_likelihood=result.log_likelihood
    )
    print(
        f"trained {result.kernel.family.value}: "
        f"signal_variance={result.kernel.signal_variance:.6g} "
        f"length_scale={result.kernel.length_scale:.6g} "
        f"log_likelihood={result.log_likelihood:.6g}"
    )
    return EXIT_OK


def _cmd_validate(args, extra):
    if extra:
        raise InvalidSpecError(f"unexpected arguments: {extra}")
    train_data = outputs.read_dataset_csv(args.train)
    test_data = outputs.read_dataset_csv(args.test)
    kernel, mean = outputs.read_model_file(args.model)
    model = gp.fit(kernel, mean, train_data)
    prediction = gp.predict(model, test_data.inputs).with_added_noise(
        test_data.noise_variances
    )
    report = run_validation(prediction, test_data.values)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs.write_report(os.path.join(args.out_dir, "report.txt"), report)
    outputs.emit_pk_histogram(
        report, os.path.join(args.out_dir, "pk_histogram.csv")
    )
    outputs.emit_posterior_heatmap(
        report.posterior,
        os.path.join(args.out_dir, "posterior"),
        mle=(report.beta_fit.a_hat, report.beta_fit.b_hat),
    )
    print(
        f"mahalanobis={report.mahalanobis:.4g} dof={report.dof} "
        f"p_value={report.p_value:.4g} a={report.beta_fit.a_hat:.4g} "
        f"b={report.beta_fit.b_hat:.4g} "
        f"uniform_coverage={report.uniform_coverage:.4g}"
    )
    return EXIT_OK


def _run_and_summarize(config):
    results = experiments.run_experiment(config)
    n_failed = sum(not r.ok for r in results)
    ok = [r for r in results if r.ok]
    if ok:
        med_p = float(np.median([r.p_value for r in ok]))
        med_a = float(np.median([r.a_hat for r in ok]))
        print(
            f"{len(ok)}/{len(results)} replicates ok; "
            f"median p_value={med_p:.4g} median a_hat={med_a:.4g}"
        )
    if n_failed * 2 > len(results):
        print(f"{n_failed}/{len(results)} replicates failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_run(args, extra):
    return _run_and_summarize(_config_from_args(args, extra))


def _cmd_replicate_study(args, extra):
    config = _config_from_args(args, extra)
    results = experiments.run_experiment(config, summary_only=True)
    n_failed = sum(not r.ok for r in results)
    print(
        f"{len(results) - n_failed}/{len(results)} replicates ok; "
        f"summary at {os.path.join(config.output_dir, 'summary.csv')}"
    )
    if n_failed * 2 > len(results):
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gpvalid",
        description="GP regression with quantitative kernel validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func in (
        ("generate", _cmd_generate),
        ("run", _cmd_run),
        ("replicate-study", _cmd_replicate_study),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value config file")
        p.set_defaults(func=func)

    p = sub.add_parser("fit")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("validate")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except InvalidSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GPValidError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
