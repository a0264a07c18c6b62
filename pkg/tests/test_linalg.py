import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zslenergy.linalg import pinv, softmax, solve_right_factor, svd

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def matrices(max_dim=8):
    shapes = st.tuples(st.integers(1, max_dim), st.integers(1, max_dim))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


class TestSvd:
    def test_identity(self):
        _, s, _ = svd(np.eye(3))
        np.testing.assert_allclose(s, [1, 1, 1])

    def test_diagonal(self):
        _, s, _ = svd(np.diag([3.0, 2.0]))
        np.testing.assert_allclose(s, [3, 2])

    def test_rank_one(self):
        # M M^T = [[2, 0], [0, 0]]
        _, s, _ = svd([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(s, [math.sqrt(2), 0.0], atol=1e-15)

    @given(matrices())
    def test_reconstruction_and_orthogonality(self, M):
        U, s, Vt = svd(M)
        scale = max(1.0, np.abs(M).max())
        assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
        np.testing.assert_allclose(U @ np.diag(s) @ Vt, M, atol=1e-10 * scale)
        np.testing.assert_allclose(U.T @ U, np.eye(len(s)), atol=1e-10)
        np.testing.assert_allclose(Vt @ Vt.T, np.eye(len(s)), atol=1e-10)

    @pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.array([1.0, 2.0]), np.array([[np.nan]])])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(ValueError):
            svd(bad)


class TestPinv:
    def test_zero_matrix(self):
        assert np.array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))

    @given(matrices(6))
    def test_penrose_conditions(self, M):
        P = pinv(M)
        scale = max(1.0, np.abs(M).max())
        np.testing.assert_allclose(M @ P @ M, M, atol=1e-7 * scale)

    def test_least_squares_optimality(self):
        rng = np.random.default_rng(11)
        W = rng.normal(size=(6, 4))
        S = rng.normal(size=(3, 4))
        V = solve_right_factor(W, S)
        best = np.linalg.norm(V @ S - W)
        for _ in range(200):
            Vp = V + 1e-3 * rng.normal(size=V.shape)
            assert np.linalg.norm(Vp @ S - W) >= best


class TestSolveRightFactor:
    def test_identity_signature(self):
        W = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(solve_right_factor(W, np.eye(2)), W)

    def test_zero_w(self):
        assert np.array_equal(solve_right_factor(np.zeros((2, 3)), np.ones((2, 3))), np.zeros((2, 2)))

    def test_zero_s_gives_zero_v(self):
        assert np.array_equal(solve_right_factor(np.ones((2, 3)), np.zeros((4, 3))), np.zeros((2, 4)))

    def test_hand_inverse(self):
        # S^-1 = [[1, -1], [0, 1]], so V = [2, 3] S^-1 = [2, 1]
        W = np.array([[2.0, 3.0]])
        S = np.array([[1.0, 1.0], [0.0, 1.0]])
        V = solve_right_factor(W, S)
        np.testing.assert_allclose(V, [[2.0, 1.0]], atol=1e-14)
        np.testing.assert_allclose(V @ S, W, atol=1e-14)

    def test_column_mismatch(self):
        with pytest.raises(ValueError, match="column mismatch"):
            solve_right_factor(np.ones((2, 3)), np.ones((2, 2)))


class TestSoftmax:
    def test_symmetric(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    @given(finite)
    def test_singleton(self, x):
        assert softmax([x])[0] == 1.0

    def test_one_zero(self):
        w = softmax([1.0, 0.0])
        e = math.e
        np.testing.assert_allclose(w, [e / (e + 1), 1 / (e + 1)], rtol=1e-15)
        assert round(w[0], 6) == 0.731059 and round(w[1], 6) == 0.268941

    @settings(max_examples=200)
    @given(arrays(np.float64, st.integers(1, 12), elements=finite), finite)
    def test_normalised_and_shift_invariant(self, s, c):
        w = softmax(s)
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w >= 0)
        np.testing.assert_allclose(softmax(s + c), w, atol=1e-12)

    def test_large_scores_do_not_overflow(self):
        w = softmax([1000.0, 999.0])
        assert np.all(np.isfinite(w))

    @pytest.mark.parametrize("bad", [[], [np.inf, 0.0], [[1.0]]])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            softmax(bad)
