import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbnorm.linalg import DESK_SCALE_LIMIT, expm, haar_orthonormal, jacobi_svd


def test_expm_zero_is_identity():
    assert np.allclose(expm(np.zeros((4, 4))), np.eye(4), rtol=0, atol=1e-15)


def test_expm_diagonal():
    d = np.array([-30.0, -1.0, 0.0, 0.5, 12.0])
    assert np.allclose(expm(np.diag(d)), np.diag(np.exp(d)), rtol=1e-12, atol=0)


def test_expm_inverse_pair():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((8, 8))
    assert np.max(np.abs(expm(a) @ expm(-a) - np.eye(8))) < 1e-10


def test_expm_rotation():
    t = 0.7
    r = expm(np.array([[0.0, -t], [t, 0.0]]))
    assert np.allclose(r, [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]], atol=1e-14)


def test_expm_nilpotent_and_large_norm():
    n = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    assert np.allclose(expm(n), np.eye(3) + n + n @ n / 2, atol=1e-15)
    big = np.array([[1.0, 50.0], [0.0, 1.0]])
    assert np.allclose(expm(big), np.e * np.array([[1.0, 50.0], [0.0, 1.0]]), rtol=1e-12)


def test_expm_matches_eigendecomposition_for_symmetric():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 6))
    s = a + a.T
    lam, q = np.linalg.eigh(s)
    assert np.allclose(expm(s), (q * np.exp(lam)) @ q.T, rtol=1e-11, atol=1e-11)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        expm(np.array([[np.nan]]))


@given(
    rows=st.integers(1, 12),
    cols=st.integers(1, 12),
    seed=st.integers(0, 2**32 - 1),
)
@settings(max_examples=60, deadline=None)
def test_jacobi_svd_matches_lapack(rows, cols, seed):
    a = np.random.default_rng(seed).standard_normal((rows, cols))
    s = jacobi_svd(a)
    assert np.allclose(s, np.linalg.svd(a, compute_uv=False), rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("shape", [(9, 5), (5, 9), (7, 7)])
def test_jacobi_svd_factors(shape):
    a = np.random.default_rng(1).standard_normal(shape)
    u, s, vt = jacobi_svd(a, compute_uv=True)
    k = min(shape)
    assert u.shape == (shape[0], k) and vt.shape == (k, shape[1])
    assert np.allclose((u * s) @ vt, a, atol=1e-13)
    # column orthogonality is what the sweep tolerance (1e-12, relative) controls
    assert np.allclose(u.T @ u, np.eye(k), atol=1e-11)
    assert np.allclose(vt @ vt.T, np.eye(k), atol=1e-13)
    assert np.all(np.diff(s) <= 0)


def test_jacobi_svd_graded_and_rank_deficient():
    # Hilbert matrices are badly conditioned; Jacobi keeps relative accuracy on the large values
    n = 8
    i = np.arange(1, n + 1)
    h = 1.0 / (i[:, None] + i[None, :] - 1)
    s = jacobi_svd(h)
    assert s[0] == pytest.approx(np.linalg.norm(h, 2), rel=1e-14)
    r = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
    s = jacobi_svd(r)
    assert s[0] == pytest.approx(np.sqrt(14.0) * np.sqrt(2.0), rel=1e-14)
    assert s[1] < 1e-15


def test_jacobi_svd_zero_matrix_and_limit():
    assert np.array_equal(jacobi_svd(np.zeros((3, 2))), np.zeros(2))
    with pytest.raises(ValueError):
        jacobi_svd(np.zeros((DESK_SCALE_LIMIT + 1, DESK_SCALE_LIMIT + 1)))


def test_haar_orthonormal_columns_and_distribution():
    rng = np.random.default_rng(0)
    q = haar_orthonormal(20, 5, rng)
    assert np.allclose(q.T @ q, np.eye(5), atol=1e-14)
    # Haar: each entry of the first column has mean 0 and variance 1/n
    firsts = np.array([haar_orthonormal(4, 1, rng)[0, 0] for _ in range(20000)])
    assert abs(firsts.mean()) < 0.015
    assert firsts.var() == pytest.approx(0.25, abs=0.01)
    with pytest.raises(ValueError):
        haar_orthonormal(3, 4, rng)
