"""Stationary covariance kernels and constant mean functions.

Three families are supported: squared-exponential (RBF), Matern nu=1.5
and Matern nu=2.5.  All are isotropic in the Euclidean distance r:

    RBF        k(r) = s2 * exp(-r^2 / (2 l^2))
    Matern 1.5 k(r) = s2 * (1 + sqrt(3) r/l) * exp(-sqrt(3) r/l)
    Matern 2.5 k(r) = s2 * (1 + sqrt(5) r/l + 5 r^2/(3 l^2)) * exp(-sqrt(5) r/l)

Gram-matrix assembly is the hot path; it has a numba loop kernel and a
broadcast numpy fallback, selected at import time (see gpvalid.backend).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .backend import USING_NUMBA, jit_or_python
from .errors import DimensionMismatchError, InvalidSpecError

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)

# integer codes used inside the jitted kernels
_RBF, _MATERN15, _MATERN25 = 0, 1, 2


class KernelFamily(str, enum.Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN15 = "matern15"
    MATERN25 = "matern25"


_FAMILY_CODE = {
    KernelFamily.SQUARED_EXPONENTIAL: _RBF,
    KernelFamily.MATERN15: _MATERN15,
    KernelFamily.MATERN25: _MATERN25,
}

_FAMILY_ALIASES = {
    "squared_exponential": KernelFamily.SQUARED_EXPONENTIAL,
    "rbf": KernelFamily.SQUARED_EXPONENTIAL,
    "se": KernelFamily.SQUARED_EXPONENTIAL,
    "matern15": KernelFamily.MATERN15,
    "matern25": KernelFamily.MATERN25,
}


def parse_family(name) -> KernelFamily:
    if isinstance(name, KernelFamily):
        return name
    key = str(name).strip().lower().replace("-", "_").replace(".", "")
    if key not in _FAMILY_ALIASES:
        raise InvalidSpecError(
            f"unknown kernel family {name!r}; choose from "
            f"{sorted(set(_FAMILY_ALIASES))}"
        )
    return _FAMILY_ALIASES[key]


@dataclass(frozen=True)
class KernelSpec:
    """A stationary kernel: family plus (signal_variance, length_scale)."""

    family: KernelFamily
    signal_variance: float
    length_scale: float

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        if not (self.signal_variance > 0.0 and math.isfinite(self.signal_variance)):
            raise InvalidSpecError(
                f"signal_variance must be positive, got {self.signal_variance}"
            )
        if not (self.length_scale > 0.0 and math.isfinite(self.length_scale)):
            raise InvalidSpecError(
                f"length_scale must be positive, got {self.length_scale}"
            )


@dataclass(frozen=True)
class MeanSpec:
    """Constant mean function mu(x) = constant."""

    constant: float = 0.0

    def __call__(self, points):
        points = as_points(points)
        return np.full(points.shape[0], float(self.constant))


def as_points(points):
    """Coerce to a (n, d) float array; 1-D input becomes a column."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise DimensionMismatchError(
            f"points must be at most 2-dimensional, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidSpecError("input points must be finite")
    return arr


@jit_or_python
def _kernel_of_r(code, s2, ell, r):
    u = r / ell
    if code == 0:  # RBF
        return s2 * math.exp(-0.5 * u * u)
    if code == 1:  # Matern 1.5
        a = SQRT3 * u
        return s2 * (1.0 + a) * math.exp(-a)
    a = SQRT5 * u  # Matern 2.5
    return s2 * (1.0 + a + 5.0 * u * u / 3.0) * math.exp(-a)


@jit_or_python
def _gram_loops(code, s2, ell, A, B, symmetric):
    n, m = A.shape[0], B.shape[0]
    d = A.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        jstart = i if symmetric else 0
        for j in range(jstart, m):
            acc = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                acc += diff * diff
            out[i, j] = _kernel_of_r(code, s2, ell, math.sqrt(acc))
            if symmetric:
                out[j, i] = out[i, j]
    return out


def _gram_numpy(code, s2, ell, A, B, symmetric):
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    r = np.sqrt(np.maximum(d2, 0.0))
    u = r / ell
    if code == _RBF:
        out = s2 * np.exp(-0.5 * u * u)
    elif code == _MATERN15:
        a = SQRT3 * u
        out = s2 * (1.0 + a) * np.exp(-a)
    else:
        a = SQRT5 * u
        out = s2 * (1.0 + a + 5.0 * u * u / 3.0) * np.exp(-a)
    if symmetric:
        out = np.triu(out) + np.triu(out, 1).T
    return out


def eval_kernel(spec: KernelSpec, x, x_prime) -> float:
    """Evaluate k(x, x') for a single pair of points."""
    a = as_points(x)
    b = as_points(x_prime)
    if a.shape != (1, a.shape[1]) or b.shape != (1, b.shape[1]):
        raise DimensionMismatchError("eval_kernel takes single points")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"point dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    r = float(np.linalg.norm(a[0] - b[0]))
    return float(
        _kernel_of_r(
            _FAMILY_CODE[spec.family],
            float(spec.signal_variance),
            float(spec.length_scale),
            r,
        )
    )


def gram_matrix(spec: KernelSpec, A, B=None):
    """Cross-covariance matrix K[i, j] = k(A_i, B_j).

    With ``B=None`` (or ``B is A``) the result is assembled symmetric by
    construction.
    """
    A = as_points(A)
    symmetric = B is None
    B_arr = A if symmetric else as_points(B)
    if A.shape[1] != B_arr.shape[1]:
        raise DimensionMismatchError(
            f"point dimensions differ: {A.shape[1]} vs {B_arr.shape[1]}"
        )
    code = _FAMILY_CODE[spec.family]
    s2 = float(spec.signal_variance)
    ell = float(spec.length_scale)
    if USING_NUMBA:
        return _gram_loops(code, s2, ell, A, B_arr, symmetric)
    return _gram_numpy(code, s2, ell, A, B_arr, symmetric)
