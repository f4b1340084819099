"""Synthetic ground truth: sample a function from a GP prior on a dense
grid, then draw noisy train/test observations from it.

All randomness flows through ``numpy.random.default_rng`` (PCG64) so a
seed pins every experiment bit-for-bit within this artifact.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidSpecError
from .gp import Dataset
from .kernels import KernelSpec, MeanSpec, as_points, gram_matrix

DEFAULT_GRID_SIZE = 512


def regular_grid(lo=0.0, hi=1.0, n=DEFAULT_GRID_SIZE):
    """Equally spaced 1-D grid, returned as (n, 1) points."""
    return np.linspace(float(lo), float(hi), int(n))[:, None]


def sample_prior_function(kernel: KernelSpec, mean: MeanSpec, grid, rng_seed: int):
    """One draw from N(mu(grid), K(grid, grid) + jitter I).

    Sampling is by Cholesky of the gridded Gram matrix times a standard
    normal vector; deterministic given the seed.
    """
    pts = as_points(grid)
    if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
        raise InvalidSpecError("grid points must be distinct")
    K = gram_matrix(kernel, pts)
    L, _ = linalg.chol_with_jitter(K)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal(pts.shape[0])
    return mean(pts) + L @ z


def make_observations(grid, truth_values, at, noise_sd: float, rng_seed: int) -> Dataset:
    """Observe the truth curve at the given points with i.i.d. Gaussian
    noise of standard deviation ``noise_sd``.

    Off-grid 1-D points are linearly interpolated from the dense grid;
    points outside the grid hull are an error.
    """
    if not noise_sd > 0.0:
        raise InvalidSpecError(f"noise_sd must be positive, got {noise_sd}")
    pts = as_points(grid)
    at = as_points(at)
    truth_values = np.asarray(truth_values, dtype=float).ravel()
    if truth_values.size != pts.shape[0]:
        raise InvalidSpecError("truth values must match the grid length")
    if pts.shape[1] != 1 or at.shape[1] != 1:
        raise InvalidSpecError("observations are supported on 1-D grids only")
    x_grid = pts[:, 0]
    x_at = at[:, 0]
    if np.any(x_at < x_grid.min()) or np.any(x_at > x_grid.max()):
        raise InvalidSpecError("observation point outside the grid hull")
    order = np.argsort(x_grid)
    f_at = np.interp(x_at, x_grid[order], truth_values[order])
    rng = np.random.default_rng(rng_seed)
    values = f_at + noise_sd * rng.standard_normal(x_at.size)
    return Dataset(at, values, np.full(x_at.size, noise_sd**2))


@dataclass(frozen=True)
class SyntheticExperiment:
    """A fully generated ground truth plus its train and test draws."""

    truth_kernel: KernelSpec
    truth_mean: MeanSpec
    grid: np.ndarray
    truth_values: np.ndarray
    train_set: Dataset
    test_set: Dataset
    rng_seed: int


def generate_experiment(
    truth_kernel: KernelSpec,
    truth_mean: MeanSpec,
    n_train: int,
    n_test: int,
    noise_sd: float,
    rng_seed: int,
    domain=(0.0, 1.0),
    grid_size: int = DEFAULT_GRID_SIZE,
) -> SyntheticExperiment:
    """Sample a truth curve and disjoint train/test observation sets.

    Train and test locations are drawn uniformly at random from the grid
    points without replacement, so no interpolation enters the pipeline.
    Sub-seeds for the truth draw, the site selection and the two noise
    draws are spawned from ``rng_seed`` via SeedSequence.
    """
    if n_train < 1 or n_test < 2:
        raise InvalidSpecError("need n_train >= 1 and n_test >= 2")
    if n_train + n_test > grid_size:
        raise InvalidSpecError(
            f"n_train + n_test = {n_train + n_test} exceeds grid size {grid_size}"
        )
    seeds = np.random.SeedSequence(rng_seed).spawn(4)
    grid = regular_grid(domain[0], domain[1], grid_size)
    truth = sample_prior_function(truth_kernel, truth_mean, grid, seeds[0])

    site_rng = np.random.default_rng(seeds[1])
    sites = site_rng.choice(grid_size, size=n_train + n_test, replace=False)
    train_idx = np.sort(sites[:n_train])
    test_idx = np.sort(sites[n_train:])

    train_set = make_observations(grid, truth, grid[train_idx], noise_sd, seeds[2])
    test_set = make_observations(grid, truth, grid[test_idx], noise_sd, seeds[3])
    return SyntheticExperiment(
        truth_kernel, truth_mean, grid, truth, train_set, test_set, rng_seed
    )
