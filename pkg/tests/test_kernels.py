import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from compgp.errors import DegenerateDesignError, InvalidArgumentError, SingularMatrixError
from compgp.kernels import (
    NO_JITTER,
    corr_matrix,
    corr_vector,
    design_stats,
    gaussian_corr,
    is_psd,
    safe_cholesky,
)

from conftest import gauss_k

E1 = math.exp(-1.0)


def test_gaussian_corr_examples():
    assert gaussian_corr([0, 0], [3, 5]) == 1.0
    assert gaussian_corr([1, 0], [1, 7]) == pytest.approx(0.367879, abs=1e-6)
    assert gaussian_corr([0.5, 0.5], [2, 2]) == pytest.approx(E1, rel=1e-15)


def test_gaussian_corr_rejects_nonfinite():
    with pytest.raises(InvalidArgumentError):
        gaussian_corr([np.nan], [1.0])
    with pytest.raises(InvalidArgumentError):
        gaussian_corr([0.1], [-1.0])


@given(h=arrays(float, 3, elements=st.floats(-2, 2)), s=arrays(float, 3, elements=st.floats(0, 50)))
def test_gaussian_corr_symmetric_and_bounded(h, s):
    v = gaussian_corr(h, s)
    assert v == gaussian_corr(-h, s)
    assert 0.0 <= v <= 1.0
    assert gaussian_corr(np.zeros(3), s) == 1.0


def test_corr_matrix_examples():
    assert np.array_equal(corr_matrix(np.array([[0.3, 0.1]]), [4.0, 2.0]), [[1.0]])
    X = np.random.default_rng(0).random((4, 2))
    assert np.array_equal(corr_matrix(X, [0.0, 0.0]), np.ones((4, 4)))
    R = corr_matrix(np.array([[0.0], [1.0]]), [1.0])
    assert np.allclose(R, [[1, E1], [E1, 1]], rtol=0, atol=1e-15)


def test_corr_vector_examples():
    X = np.array([[0.0], [1.0]])
    assert corr_vector(X, [0.0], [3.0])[0] == 1.0
    assert np.array_equal(corr_vector(X, [0.4], [0.0]), [1.0, 1.0])
    assert np.allclose(corr_vector(X, [0.5], [4.0]), [E1, E1], atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        corr_vector(X, [0.1, 0.2], [1.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 30), p=st.integers(1, 4))
def test_corr_matrix_structure(seed, n, p):
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    s = rng.uniform(0.1, 30, p)
    R = corr_matrix(X, s)
    assert np.array_equal(R, R.T)
    assert np.all(np.diag(R) == 1.0)
    assert np.allclose(R, gauss_k(X, X, s), atol=1e-14)
    assert np.linalg.eigvalsh(R).min() >= -1e-8


def test_design_stats_examples():
    st2 = design_stats(np.array([[0.0, 0.0], [0.3, 0.4]]))
    assert st2.d_avg == pytest.approx(0.5, rel=1e-14)
    assert st2.alpha_lower == pytest.approx(18.4207, abs=1e-4)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]]) * 0.7
    assert design_stats(tri).d_avg == pytest.approx(0.7, rel=1e-12)
    assert design_stats(np.array([[0.0], [1.0]])).alpha_lower == pytest.approx(math.log(100), rel=1e-14)


def test_design_stats_rejects_duplicates():
    with pytest.raises(DegenerateDesignError):
        design_stats(np.array([[0.2, 0.2], [0.2, 0.2], [0.9, 0.1]]))
    with pytest.raises(DegenerateDesignError):
        design_stats(np.array([[0.2]]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(1.1, 5.0))
def test_design_stats_permutation_and_scaling(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.random((7, 3))
    base = design_stats(X)
    perm = design_stats(X[rng.permutation(7)])
    assert perm.d_avg == pytest.approx(base.d_avg, rel=1e-12)
    scaled = design_stats(c * X)
    assert scaled.d_avg == pytest.approx(c * base.d_avg, rel=1e-12)
    assert scaled.alpha_lower == pytest.approx(base.alpha_lower / c**2, rel=1e-12)


def test_safe_cholesky_identity():
    f = safe_cholesky(np.eye(4))
    assert f.jitter == 0.0
    assert np.array_equal(f.L, np.eye(4))


def test_safe_cholesky_rank_one_needs_jitter():
    f = safe_cholesky(np.ones((2, 2)))
    assert f.jitter > 0
    with pytest.raises(SingularMatrixError) as err:
        safe_cholesky(np.ones((2, 2)), NO_JITTER)
    assert "min_eigenvalue" in err.value.diagnostics


def test_safe_cholesky_reconstruction():
    A = np.random.default_rng(3).normal(size=(5, 5))
    M = A @ A.T + np.eye(5)
    f = safe_cholesky(M)
    err = np.abs(f.L @ f.L.T - M).sum(axis=1).max()
    assert err <= 1e-10 * np.abs(M).sum(axis=1).max()
    b = np.arange(5.0)
    assert np.allclose(f.solve(b), np.linalg.solve(M, b), atol=1e-12)
    assert f.logdet() == pytest.approx(np.linalg.slogdet(M)[1], rel=1e-12)


def test_is_psd():
    assert is_psd(np.eye(3))
    assert not is_psd(np.diag([1.0, -1.0]))
