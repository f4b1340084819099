"""Quantitative validation of a GP's probabilistic predictions.

Given a predictive MVN and held-out observations, this module computes:

  * the Mahalanobis distance of the residuals and its chi-squared p-value;
  * normal-mode residuals: the residual vector rotated into the eigenbasis
    of the predictive covariance and standardized, which are i.i.d. N(0,1)
    when the kernel model is adequate;
  * their upper-tail survival probabilities p_k, uniform on (0,1) under an
    adequate model;
  * a Beta(a, b) fit to the p_k (MLE plus a gridded Bayesian posterior
    under a uniform prior), and the iso-posterior coverage of the uniform
    point (a, b) = (1, 1) -- the credible level at which the uniform model
    sits on the boundary of the highest-density region.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DimensionMismatchError,
    IllConditionedModelError,
    InvalidSpecError,
    WidenGridError,
)
from .gp import Prediction
from .linalg import jacobi_eigh
from .specfn import _normal_survival, chi2_survival, log_gamma_vec

# eigenvalue floor (relative to the largest eigenvalue) below which a
# predictive-covariance mode is dropped rather than standardized
EIGENVALUE_FLOOR_REL = 1e-12

# survival probabilities are clamped to this interval before Beta
# likelihood evaluation; the log-density diverges at the boundary
P_CLAMP = (1e-15, 1.0 - 1e-15)


@dataclass(frozen=True)
class NormalModeResiduals:
    """Residuals decomposed along the predictive covariance eigenbasis."""

    eigenvalues: np.ndarray  # s_k^2, descending, retained modes only
    rotated_residuals: np.ndarray  # d_k
    standardized: np.ndarray  # e_k = d_k / s_k
    survival_probs: np.ndarray  # p_k = P[Z > e_k]
    n_dropped: int = 0  # modes below the eigenvalue floor


@dataclass(frozen=True)
class BetaFit:
    a_hat: float
    b_hat: float
    max_log_likelihood: float
    converged: bool = True
    degenerate: bool = False


@dataclass(frozen=True)
class GridConfig:
    """Bounds and resolution of the Beta-parameter posterior grid."""

    a_min: float = 0.05
    a_max: float = 3.0
    b_min: float = 0.05
    b_max: float = 3.0
    n_a: int = 300
    n_b: int = 300

    def __post_init__(self):
        if not (0.0 < self.a_min < self.a_max and 0.0 < self.b_min < self.b_max):
            raise InvalidSpecError("grid bounds must satisfy 0 < min < max")
        if self.n_a < 50 or self.n_b < 50:
            raise InvalidSpecError("grid resolution must be at least 50 per axis")

    def widened(self, a_low=True, a_high=True, b_low=True, b_high=True):
        """Push out the requested sides: mins halve (floored at 1e-4),
        maxes double.  Widening only the touched sides keeps resolution
        around a peak near the opposite boundary."""
        return replace(
            self,
            a_min=max(self.a_min / 2.0, 1e-4) if a_low else self.a_min,
            a_max=self.a_max * 2.0 if a_high else self.a_max,
            b_min=max(self.b_min / 2.0, 1e-4) if b_low else self.b_min,
            b_max=self.b_max * 2.0 if b_high else self.b_max,
        )


@dataclass(frozen=True)
class BetaPosterior:
    a_grid: np.ndarray  # cell midpoints along a
    b_grid: np.ndarray  # cell midpoints along b
    a_edges: np.ndarray
    b_edges: np.ndarray
    log_density: np.ndarray  # log posterior density at midpoints, (n_a, n_b)
    cell_mass: np.ndarray  # normalized, sums to 1


@dataclass(frozen=True)
class ValidationReport:
    mahalanobis: float
    dof: int
    p_value: float
    residuals: NormalModeResiduals
    beta_fit: BetaFit
    posterior: BetaPosterior
    uniform_coverage: float


def _residual(prediction: Prediction, observed) -> np.ndarray:
    observed = np.asarray(observed, dtype=float).ravel()
    if observed.size != len(prediction):
        raise DimensionMismatchError(
            f"{observed.size} observations for {len(prediction)} predictions"
        )
    return observed - prediction.mean


def _decompose(prediction: Prediction, observed):
    """Shared eigendecomposition behind mahalanobis() and
    normal_mode_residuals()."""
    r = _residual(prediction, observed)
    w, O = jacobi_eigh(prediction.covariance)
    w_max = float(w[0])
    if w_max <= 0.0:
        raise IllConditionedModelError(
            f"predictive covariance has no positive eigenvalue "
            f"(largest = {w_max:.3e})"
        )
    floor = EIGENVALUE_FLOOR_REL * w_max
    keep = w >= floor
    d_full = O.T @ r
    s = np.sqrt(w[keep])
    e = d_full[keep] / s
    return w, O, d_full, keep, s, e


def mahalanobis(prediction: Prediction, observed):
    """Mahalanobis distance of the residuals under the predictive
    covariance, with the retained degrees of freedom.

    Chi-squared distributed with ``dof`` degrees of freedom when the
    observations really are drawn from the prediction.
    """
    _, _, _, keep, _, e = _decompose(prediction, observed)
    return float(e @ e), int(np.count_nonzero(keep))


def normal_mode_residuals(prediction: Prediction, observed) -> NormalModeResiduals:
    """Rotate residuals into the covariance eigenbasis and standardize.

    Modes whose eigenvalue falls below ``EIGENVALUE_FLOOR_REL`` times the
    largest are dropped (counted in ``n_dropped``).
    """
    w, _, d_full, keep, s, e = _decompose(prediction, observed)
    p = np.array([_normal_survival(ek) for ek in e])
    p = np.clip(p, 1e-300, 1.0 - 1e-16)
    return NormalModeResiduals(
        eigenvalues=w[keep],
        rotated_residuals=d_full[keep],
        standardized=e,
        survival_probs=p,
        n_dropped=int(np.count_nonzero(~keep)),
    )


def _clamp_probs(p):
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0:
        raise InvalidSpecError("empty probability vector")
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidSpecError("probabilities must lie in [0, 1]")
    return np.clip(p, P_CLAMP[0], P_CLAMP[1])


def beta_log_likelihood(p, a, b) -> float:
    """Unbinned Beta log-likelihood via sufficient statistics."""
    p = _clamp_probs(p)
    n = p.size
    s_log = float(np.sum(np.log(p)))
    s_log1m = float(np.sum(np.log1p(-p)))
    lg = log_gamma_vec(np.array([a + b, a, b]))
    return n * (lg[0] - lg[1] - lg[2]) + (a - 1.0) * s_log + (b - 1.0) * s_log1m


def _moment_start(p):
    m = float(np.mean(p))
    v = float(np.var(p))
    if v < 1e-12 or not 0.0 < m < 1.0:
        return 1.0, 1.0
    common = m * (1.0 - m) / v - 1.0
    if common <= 0.0:
        return 1.0, 1.0
    return max(m * common, 1e-3), max((1.0 - m) * common, 1e-3)


def beta_mle(p) -> BetaFit:
    """Maximum-likelihood Beta(a, b) fit to probabilities in (0, 1).

    Nelder-Mead in (log a, log b) from method-of-moments starting values.
    A (numerically) constant sample cannot identify (a, b); it is
    reported as a degenerate fit at the uniform parameters.
    """
    p = _clamp_probs(p)
    if p.size < 2:
        raise InvalidSpecError("beta_mle needs at least 2 points")
    if float(np.var(p)) < 1e-12:
        return BetaFit(1.0, 1.0, beta_log_likelihood(p, 1.0, 1.0),
                       converged=True, degenerate=True)
    a0, b0 = _moment_start(p)

    # precompute sufficient statistics once
    n = p.size
    s_log = float(np.sum(np.log(p)))
    s_log1m = float(np.sum(np.log1p(-p)))

    def neg_loglik(theta):
        if np.any(np.abs(theta) > 30.0):
            return 1e12
        a, b = math.exp(theta[0]), math.exp(theta[1])
        lg = log_gamma_vec(np.array([a + b, a, b]))
        ll = n * (lg[0] - lg[1] - lg[2]) + (a - 1.0) * s_log + (b - 1.0) * s_log1m
        return -ll

    res = minimize(
        neg_loglik,
        np.log([a0, b0]),
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": 5000},
    )
    a_hat, b_hat = float(np.exp(res.x[0])), float(np.exp(res.x[1]))
    return BetaFit(a_hat, b_hat, -float(res.fun), converged=bool(res.success))


def beta_posterior(p, grid_config: GridConfig | None = None,
                   max_widenings: int = 30) -> BetaPosterior:
    """Bayesian posterior over (a, b) under a uniform prior, by midpoint
    quadrature on a rectangular grid.

    The grid auto-widens (x2 per step) whenever the MLE or the 1e-6
    relative-likelihood contour touches the boundary; if the cap on
    widenings is reached a WidenGridError asks the caller for explicit
    bounds.
    """
    p = _clamp_probs(p)
    cfg = grid_config or GridConfig()
    fit = beta_mle(p)

    n = p.size
    s_log = float(np.sum(np.log(p)))
    s_log1m = float(np.sum(np.log1p(-p)))

    # a degenerate sample (all p equal) has no interior optimum; chasing
    # the likelihood by widening would never terminate
    widenings = 0 if fit.degenerate else max_widenings

    attempt = 0
    while True:
        a_edges = np.linspace(cfg.a_min, cfg.a_max, cfg.n_a + 1)
        b_edges = np.linspace(cfg.b_min, cfg.b_max, cfg.n_b + 1)
        a_mid = 0.5 * (a_edges[:-1] + a_edges[1:])
        b_mid = 0.5 * (b_edges[:-1] + b_edges[1:])
        A, B = np.meshgrid(a_mid, b_mid, indexing="ij")
        log_density = (
            n * (log_gamma_vec(A + B) - log_gamma_vec(A) - log_gamma_vec(B))
            + (A - 1.0) * s_log
            + (B - 1.0) * s_log1m
        )
        thresh = float(np.max(log_density)) + math.log(1e-6)
        a_low = float(np.max(log_density[0, :])) > thresh or fit.a_hat <= cfg.a_min
        a_high = float(np.max(log_density[-1, :])) > thresh or fit.a_hat >= cfg.a_max
        b_low = float(np.max(log_density[:, 0])) > thresh or fit.b_hat <= cfg.b_min
        b_high = float(np.max(log_density[:, -1])) > thresh or fit.b_hat >= cfg.b_max
        if fit.degenerate or not (a_low or a_high or b_low or b_high):
            break
        widened = cfg.widened(a_low, a_high, b_low, b_high)
        if widened == cfg:
            # every touching min side sits at its floor; the remaining
            # boundary density is a coarse-cell artifact, not clipping
            break
        if attempt >= widenings:
            raise WidenGridError(
                f"posterior grid still clips the likelihood after "
                f"{widenings} widenings; pass explicit GridConfig bounds "
                f"(MLE at a={fit.a_hat:.4g}, b={fit.b_hat:.4g})"
            )
        cfg = widened
        attempt += 1

    mass = np.exp(log_density - float(np.max(log_density)))
    mass /= float(np.sum(mass))
    return BetaPosterior(a_mid, b_mid, a_edges, b_edges, log_density, mass)


def _locate_cell(edges, x):
    if not edges[0] <= x <= edges[-1]:
        raise InvalidSpecError(
            f"query {x} outside the posterior grid [{edges[0]}, {edges[-1]}]"
        )
    idx = int(np.searchsorted(edges, x, side="right") - 1)
    return min(max(idx, 0), edges.size - 2)


def iso_posterior_coverage(posterior: BetaPosterior, point) -> float:
    """Posterior mass of all cells whose density strictly exceeds the
    density at the query point's cell.

    This is the credible level of the highest-density region whose
    boundary passes through the query point: 0 at the mode, approaching
    1 at the least plausible cells.
    """
    a, b = float(point[0]), float(point[1])
    i = _locate_cell(posterior.a_edges, a)
    j = _locate_cell(posterior.b_edges, b)
    level = posterior.log_density[i, j]
    return float(np.sum(posterior.cell_mass[posterior.log_density > level]))


def validate(prediction: Prediction, observed,
             grid_config: GridConfig | None = None) -> ValidationReport:
    """Full validation: Mahalanobis p-value, normal-mode survival
    probabilities, Beta MLE/posterior and the coverage of (1, 1)."""
    residuals = normal_mode_residuals(prediction, observed)
    e = residuals.standardized
    chi2 = float(e @ e)
    dof = e.size
    p_value = chi2_survival(chi2, dof) if dof >= 1 else float("nan")
    fit = beta_mle(residuals.survival_probs)
    posterior = beta_posterior(residuals.survival_probs, grid_config)
    coverage = iso_posterior_coverage(posterior, (1.0, 1.0))
    return ValidationReport(
        mahalanobis=chi2,
        dof=dof,
        p_value=p_value,
        residuals=residuals,
        beta_fit=fit,
        posterior=posterior,
        uniform_coverage=coverage,
    )
