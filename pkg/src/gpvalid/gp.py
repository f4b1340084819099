"""Exact Gaussian-process conditioning and likelihood training.

The predictive distribution at test points X* given noisy observations
(X, f, N) is the usual conditional MVN:

    mean = mu* + K* (K + N)^-1 (f - mu)
    cov  = K** - K* (K + N)^-1 K*^T

computed through a single cached Cholesky factorization of
(K + N + jitter I).  Hyperparameters are trained by multi-start
Nelder-Mead on the log marginal likelihood in log-parameter space.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import (
    DimensionMismatchError,
    IllConditionedModelError,
    InvalidSpecError,
    TrainingFailureError,
)
from .kernels import KernelSpec, MeanSpec, as_points, gram_matrix, parse_family

LOG2PI = math.log(2.0 * math.pi)

# soft box (in natural units, relative to data scales) that keeps the
# simplex away from degenerate hyperparameters
_ELL_BOX = (1e-4, 1e4)
_S2_BOX = (1e-8, 1e8)


@dataclass(frozen=True)
class Dataset:
    """Observed inputs, values and known per-point noise variances."""

    inputs: np.ndarray
    values: np.ndarray
    noise_variances: np.ndarray

    def __post_init__(self):
        inputs = as_points(self.inputs)
        values = np.asarray(self.values, dtype=float).ravel()
        noise = np.asarray(self.noise_variances, dtype=float).ravel()
        if not (inputs.shape[0] == values.size == noise.size):
            raise DimensionMismatchError(
                f"inconsistent lengths: {inputs.shape[0]} inputs, "
                f"{values.size} values, {noise.size} noise variances"
            )
        if np.any(noise < 0.0):
            raise InvalidSpecError("noise variances must be non-negative")
        if not np.all(np.isfinite(values)):
            raise InvalidSpecError("observed values must be finite")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "noise_variances", noise)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class FittedGP:
    """A kernel + mean + data with a cached factorization of (K + N)."""

    kernel: KernelSpec
    mean: MeanSpec
    training_data: Dataset
    chol: np.ndarray
    jitter: float
    _alpha: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class Prediction:
    """Predictive MVN over function values at the test inputs."""

    mean: np.ndarray
    covariance: np.ndarray

    def __len__(self):
        return self.mean.size

    def with_added_noise(self, noise_variances):
        """Return a copy with observation noise added on the diagonal,
        i.e. the distribution of *noisy* measurements at the test points."""
        noise = np.asarray(noise_variances, dtype=float).ravel()
        if noise.size != self.mean.size:
            raise DimensionMismatchError(
                f"{noise.size} noise variances for {self.mean.size} points"
            )
        return Prediction(self.mean.copy(), self.covariance + np.diag(noise))


def fit(kernel: KernelSpec, mean: MeanSpec, data: Dataset) -> FittedGP:
    """Assemble and factorize (K + N + jitter I) for later prediction."""
    K = gram_matrix(kernel, data.inputs)
    A = K + np.diag(data.noise_variances)
    L, jitter = linalg.chol_with_jitter(A, pivot_gate=True)
    resid = data.values - mean(data.inputs)
    alpha = linalg.cho_solve(L, resid)
    return FittedGP(kernel, mean, data, L, jitter, alpha)


def predict(model: FittedGP, test_inputs) -> Prediction:
    """Predictive mean and full covariance at the test inputs."""
    Xs = as_points(test_inputs)
    if Xs.shape[1] != model.training_data.inputs.shape[1]:
        raise DimensionMismatchError(
            f"test dimension {Xs.shape[1]} != training dimension "
            f"{model.training_data.inputs.shape[1]}"
        )
    Kxs = gram_matrix(model.kernel, Xs, model.training_data.inputs)
    Kss = gram_matrix(model.kernel, Xs)
    mean_vec = model.mean(Xs) + Kxs @ model._alpha
    V = linalg.solve_lower(model.chol, Kxs.T)
    cov = Kss - V.T @ V
    cov = 0.5 * (cov + cov.T)
    diag_tol = 1e-10 * max(1.0, model.kernel.signal_variance)
    d = np.diag(cov)
    if np.any(d < -diag_tol):
        raise IllConditionedModelError(
            f"negative predictive variance {d.min():.3e} beyond tolerance"
        )
    clip = d < 0.0
    if np.any(clip):
        cov = cov.copy()
        cov[np.diag_indices_from(cov)] = np.where(clip, 0.0, d)
    return Prediction(mean_vec, cov)


def log_marginal_likelihood(kernel: KernelSpec, mean: MeanSpec, data: Dataset) -> float:
    """Log density of the observed values under N(mu, K + N)."""
    K = gram_matrix(kernel, data.inputs)
    A = K + np.diag(data.noise_variances)
    L, _ = linalg.chol_with_jitter(A, pivot_gate=True)
    resid = data.values - mean(data.inputs)
    alpha = linalg.cho_solve(L, resid)
    n = len(data)
    return float(
        -0.5 * resid @ alpha
        - np.sum(np.log(np.diag(L)))
        - 0.5 * n * LOG2PI
    )


@dataclass(frozen=True)
class TrainResult:
    kernel: KernelSpec
    log_likelihood: float
    noise_sd: float | None = None
    n_failed_restarts: int = 0


def _data_scales(data: Dataset):
    inputs = data.inputs
    span = float(np.max(np.ptp(inputs, axis=0))) if len(data) > 1 else 0.0
    if span <= 0.0:
        span = 1.0
    vscale = float(np.var(data.values))
    if vscale <= 0.0:
        vscale = 1e-12
    return span, vscale


def train(
    kernel_family,
    mean: MeanSpec,
    data: Dataset,
    restarts: int = 5,
    rng_seed: int = 0,
    train_noise: bool = False,
) -> TrainResult:
    """Maximize the log marginal likelihood over (signal_variance,
    length_scale) [and optionally a homoscedastic noise sd] in log space.

    Restart starting points are drawn log-uniform over
    length_scale in [0.01, 10] x input range and signal_variance in
    [0.01, 100] x var(values); the best converged restart wins and the
    whole procedure is deterministic given ``rng_seed``.
    """
    if restarts < 1:
        raise InvalidSpecError("restarts must be >= 1")
    family = parse_family(kernel_family)
    span, vscale = _data_scales(data)
    rng = np.random.default_rng(rng_seed)

    lo = np.log([_S2_BOX[0] * vscale, _ELL_BOX[0] * span])
    hi = np.log([_S2_BOX[1] * vscale, _ELL_BOX[1] * span])
    if train_noise:
        lo = np.append(lo, 0.5 * math.log(1e-16 * vscale))
        hi = np.append(hi, 0.5 * math.log(1e8 * vscale))

    def objective(theta):
        if np.any(theta < lo) or np.any(theta > hi):
            # soft wall: quadratic growth outside the box
            excess = np.maximum(theta - hi, 0.0) + np.maximum(lo - theta, 0.0)
            return 1e10 * (1.0 + float(excess @ excess))
        spec = KernelSpec(family, math.exp(theta[0]), math.exp(theta[1]))
        if train_noise:
            noise = np.full(len(data), math.exp(2.0 * theta[2]))
            d = Dataset(data.inputs, data.values, noise)
        else:
            d = data
        try:
            return -log_marginal_likelihood(spec, mean, d)
        except IllConditionedModelError:
            return 1e10

    best = None
    n_failed = 0
    for _ in range(restarts):
        s2_0 = vscale * math.exp(rng.uniform(math.log(0.01), math.log(100.0)))
        ell_0 = span * math.exp(rng.uniform(math.log(0.01), math.log(10.0)))
        theta0 = [math.log(s2_0), math.log(ell_0)]
        if train_noise:
            theta0.append(0.5 * math.log(max(vscale * 0.01, 1e-12)))
        res = minimize(
            objective,
            np.array(theta0),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 2000},
        )
        if not np.isfinite(res.fun) or res.fun >= 1e10:
            n_failed += 1
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise TrainingFailureError(
            f"all {restarts} restarts failed to reach a finite likelihood "
            f"(family={family.value}, n={len(data)})"
        )
    theta = best.x
    if theta[0] <= lo[0] + 1e-3:
        raise TrainingFailureError(
            "signal variance collapsed to its lower bound; the data carry "
            "no signal at this noise level"
        )
    spec = KernelSpec(family, math.exp(theta[0]), math.exp(theta[1]))
    noise_sd = math.exp(theta[2]) if train_noise else None
    return TrainResult(spec, -float(best.fun), noise_sd, n_failed)
