"""Benchmark the numba hot kernels against the pure-numpy fallback.

Usage:
    python -m gpvalid.benchmark [--repeats N]

The parent process spawns one subprocess per backend (the backend is
fixed at import time by GPVALID_BACKEND), collects per-task timings and
prints a comparison table.
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _time_task(fn, repeats):
    fn()  # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_tasks(repeats):
    import numpy as np

    from . import gp, synth
    from .kernels import KernelSpec, MeanSpec, gram_matrix
    from .linalg import jacobi_eigh
    from .specfn import chi2_survival
    from .validation import validate

    spec = KernelSpec("matern15", 1.0, 0.1)
    grid = synth.regular_grid(0.0, 1.0, 512)
    rng = np.random.default_rng(0)
    sym = rng.standard_normal((80, 80))
    sym = sym @ sym.T
    chis = rng.uniform(40.0, 140.0, size=5000)

    experiment = synth.generate_experiment(
        spec, MeanSpec(0.0), 40, 80, 0.05, rng_seed=3
    )
    model = gp.fit(spec, MeanSpec(0.0), experiment.train_set)
    prediction = gp.predict(model, experiment.test_set.inputs).with_added_noise(
        experiment.test_set.noise_variances
    )

    tasks = {
        "gram_512x512": lambda: gram_matrix(spec, grid),
        "jacobi_eigh_80x80": lambda: jacobi_eigh(sym),
        "chi2_survival_5000": lambda: [chi2_survival(c, 80) for c in chis],
        "validate_80pts": lambda: validate(prediction, experiment.test_set.values),
    }
    return {name: _time_task(fn, repeats) for name, fn in tasks.items()}


def _worker(repeats):
    print(json.dumps(run_tasks(repeats)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.worker:
        _worker(args.repeats)
        return 0

    timings = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, GPVALID_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-m", "gpvalid.benchmark", "--worker",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True,
        )
        timings[backend] = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"{'task':24s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>9s}")
    for task in timings["numba"]:
        t_nb = timings["numba"][task] * 1e3
        t_np = timings["numpy"][task] * 1e3
        print(f"{task:24s} {t_nb:12.3f} {t_np:12.3f} {t_np / t_nb:8.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
