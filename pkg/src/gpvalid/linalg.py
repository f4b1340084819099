"""Dense symmetric linear algebra: jittered Cholesky and a cyclic
Jacobi eigensolver.

The Jacobi solver is the hot kernel of the validation pipeline (one
full eigendecomposition of the predictive covariance per replicate);
it runs under numba when that backend is active.  ``numpy.linalg.eigh``
is deliberately *not* used here so the test suite can hold it in
reserve as an independent oracle.
"""

import math

import numpy as np

from .backend import jit_or_python
from .errors import IllConditionedModelError

JITTER_START_REL = 1e-10
JITTER_MAX_REL = 1e-4


def chol_with_jitter(A, pivot_gate=False):
    """Cholesky-factor a symmetric matrix, escalating a relative jitter
    ladder (1e-10 to 1e-4 times the largest diagonal, steps of 10x).

    Returns ``(L, jitter)`` where ``L @ L.T == A + jitter * I``.  With
    ``pivot_gate`` the factorization is additionally rejected when the
    smallest pivot is jitter-dominated (``min(diag L)^2 < 3 * jitter``),
    which catches exactly-singular inputs such as duplicated points that
    the jitter alone would paper over.

    Raises IllConditionedModelError after the ladder is exhausted,
    reporting the final jitter tried.
    """
    A = np.asarray(A, dtype=float)
    scale = float(np.max(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0.0:
        raise IllConditionedModelError(
            f"matrix diagonal has non-positive maximum {scale}"
        )
    jitter = JITTER_START_REL * scale
    jitter_max = JITTER_MAX_REL * scale
    eye = np.eye(A.shape[0])
    while jitter <= jitter_max * (1.0 + 1e-12):
        try:
            L = np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        if pivot_gate and float(np.min(np.diag(L))) ** 2 < 3.0 * jitter:
            jitter *= 10.0
            continue
        return L, jitter
    raise IllConditionedModelError(
        f"Cholesky failed up to jitter {jitter / 10.0:.3e} "
        f"(relative {JITTER_MAX_REL:.0e})",
        final_jitter=jitter / 10.0,
    )


def solve_lower(L, B):
    """Solve L x = B for lower-triangular L."""
    from scipy.linalg import solve_triangular

    return solve_triangular(L, B, lower=True, check_finite=False)


def solve_upper(L, B):
    """Solve L.T x = B for lower-triangular L."""
    from scipy.linalg import solve_triangular

    return solve_triangular(L.T, B, lower=False, check_finite=False)


def cho_solve(L, B):
    """Solve (L L.T) x = B."""
    return solve_upper(L, solve_lower(L, B))


@jit_or_python
def _jacobi_eigh_core(A, max_sweeps, rel_tol):
    n = A.shape[0]
    a = A.copy()
    v = np.eye(n)
    frob2 = np.sum(a * a)
    if frob2 == 0.0:
        return np.zeros(n), v
    tol = rel_tol * rel_tol * frob2
    for _ in range(max_sweeps):
        # accumulate the off-diagonal norm directly; subtracting the
        # diagonal part from the full norm cancels catastrophically
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    return np.diag(a).copy(), v


def jacobi_eigh(A, max_sweeps=100, rel_tol=1e-15):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted descending, with
    eigenvectors in columns so ``V @ diag(w) @ V.T == A``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    w, v = _jacobi_eigh_core(A, max_sweeps, rel_tol)
    order = np.argsort(-w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])
