"""Kernel evaluation and Gram-matrix assembly."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpvalid.errors import DimensionMismatchError, InvalidSpecError
from gpvalid.kernels import KernelSpec, MeanSpec, eval_kernel, gram_matrix
from gpvalid.linalg import chol_with_jitter

FAMILIES = ("squared_exponential", "matern15", "matern25")


def spec_of(family, s2=1.0, ell=1.0):
    return KernelSpec(family, s2, ell)


class TestEvalKernel:
    def test_zero_distance_returns_signal_variance(self):
        for family in FAMILIES:
            for s2 in (1.0, 2.5):
                assert eval_kernel(spec_of(family, s2), 0.3, 0.3) == pytest.approx(s2)

    def test_rbf_unit_distance(self):
        assert eval_kernel(spec_of("rbf"), 0.0, 1.0) == pytest.approx(
            math.exp(-0.5), rel=1e-15
        )

    def test_matern_closed_forms(self):
        r, ell = 0.7, 0.4
        u = r / ell
        expected15 = (1 + math.sqrt(3) * u) * math.exp(-math.sqrt(3) * u)
        expected25 = (1 + math.sqrt(5) * u + 5 * u * u / 3) * math.exp(-math.sqrt(5) * u)
        assert eval_kernel(spec_of("matern15", 1.0, ell), 0.0, r) == pytest.approx(
            expected15, rel=1e-14
        )
        assert eval_kernel(spec_of("matern25", 1.0, ell), 0.0, r) == pytest.approx(
            expected25, rel=1e-14
        )

    @given(
        st.sampled_from(FAMILIES),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=-5, max_value=5),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, family, x, y):
        spec = spec_of(family, 1.3, 0.7)
        assert eval_kernel(spec, x, y) == eval_kernel(spec, y, x)

    def test_translation_invariance(self):
        # (x+s) - (y+s) is not exactly x - y in floats, so compare at
        # tight relative tolerance rather than bit-exactly
        rng = np.random.default_rng(5)
        for family in FAMILIES:
            spec = spec_of(family, 2.0, 0.3)
            for _ in range(20):
                x, y, shift = rng.uniform(-3, 3, size=3)
                assert eval_kernel(spec, x, y) == pytest.approx(
                    eval_kernel(spec, x + shift, y + shift), rel=1e-10
                )

    def test_monotone_decay(self):
        rs = np.linspace(0.0, 5.0, 200)
        for family in FAMILIES:
            spec = spec_of(family, 1.0, 0.6)
            vals = [eval_kernel(spec, 0.0, float(r)) for r in rs]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_small_r_curvature(self):
        # 2 (1 - k(r)/s2) / r^2 at r -> 0 equals 1/ell^2 (RBF),
        # 5/(3 ell^2) (Matern 2.5) and 3/ell^2 (Matern 1.5)
        ell = 0.8
        r = 1e-4
        expected = {
            "squared_exponential": 1.0 / ell**2,
            "matern25": 5.0 / (3.0 * ell**2),
            "matern15": 3.0 / ell**2,
        }
        for family, target in expected.items():
            k = eval_kernel(spec_of(family, 1.0, ell), 0.0, r)
            curvature = 2.0 * (1.0 - k) / r**2
            assert curvature == pytest.approx(target, rel=1e-3)
        # the Matern 1.5 curvature differs from the other two
        assert expected["matern15"] > 1.5 * expected["matern25"]

    def test_invalid_hyperparameters(self):
        for s2, ell in [(-1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (1.0, -2.0)]:
            with pytest.raises(InvalidSpecError):
                KernelSpec("rbf", s2, ell)
        with pytest.raises(InvalidSpecError):
            KernelSpec("not_a_kernel", 1.0, 1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            eval_kernel(spec_of("rbf"), [0.0, 1.0], [0.0])


class TestGramMatrix:
    def test_single_point(self):
        K = gram_matrix(spec_of("rbf", 2.5), [[0.0]])
        np.testing.assert_allclose(K, [[2.5]])

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, size=(12, 1))
        for family in FAMILIES:
            K = gram_matrix(spec_of(family, 1.7, 0.2), pts)
            assert np.array_equal(K, K.T)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, size=(5, 1))
        K = gram_matrix(spec_of("rbf"), pts)
        assert np.min(np.linalg.eigvalsh(K)) >= -1e-10

    def test_cholesky_with_jitter_always_succeeds(self):
        rng = np.random.default_rng(2)
        for family in FAMILIES:
            pts = np.sort(rng.uniform(0, 1, size=16))[:, None]
            s2 = 1.4
            K = gram_matrix(spec_of(family, s2, 0.3), pts)
            L, jitter = chol_with_jitter(K + 1e-10 * s2 * np.eye(16))
            np.testing.assert_allclose(
                L @ L.T, K + (1e-10 * s2 + jitter) * np.eye(16), rtol=0, atol=1e-12
            )

    def test_matches_eval_kernel_entrywise(self):
        rng = np.random.default_rng(3)
        A = rng.uniform(-1, 1, size=(6, 2))
        B = rng.uniform(-1, 1, size=(4, 2))
        spec = spec_of("matern25", 0.9, 0.5)
        K = gram_matrix(spec, A, B)
        for i in range(6):
            for j in range(4):
                assert K[i, j] == pytest.approx(
                    eval_kernel(spec, A[i : i + 1], B[j : j + 1]), rel=1e-14
                )

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            gram_matrix(spec_of("rbf"), np.zeros((3, 2)), np.zeros((3, 1)))


def test_mean_spec_constant():
    mean = MeanSpec(1.5)
    np.testing.assert_allclose(mean(np.zeros((4, 1))), 1.5)
