"""Gaussian-process regression with quantitative covariance-kernel
validation: Mahalanobis goodness of fit, normal-mode residual
diagnostics and Beta-posterior calibration of survival probabilities.
"""

from .backend import BACKEND, USING_NUMBA
from .errors import (
    BoundaryInputError,
    DimensionMismatchError,
    GPValidError,
    IllConditionedModelError,
    InvalidSpecError,
    TrainingFailureError,
    UnsupportedPlotError,
    WidenGridError,
)
from .gp import (
    Dataset,
    FittedGP,
    Prediction,
    TrainResult,
    fit,
    log_marginal_likelihood,
    predict,
    train,
)
from .kernels import KernelFamily, KernelSpec, MeanSpec, eval_kernel, gram_matrix
from .specfn import chi2_survival, erf, log_beta_density, log_gamma, normal_survival
from .synth import (
    SyntheticExperiment,
    generate_experiment,
    make_observations,
    regular_grid,
    sample_prior_function,
)
from .validation import (
    BetaFit,
    BetaPosterior,
    GridConfig,
    NormalModeResiduals,
    ValidationReport,
    beta_mle,
    beta_posterior,
    iso_posterior_coverage,
    mahalanobis,
    normal_mode_residuals,
    validate,
)

__version__ = "0.1.0"
