"""Jacobi eigenvalue/SVD routines against numpy's LAPACK-backed oracles."""

import numpy as np
import pytest

from vargram.jacobi import (
    determinant_and_min_eigenvalue,
    numeric_rank,
    singular_values,
    symmetric_eigenvalues,
)


def _random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) * scale
    return 0.5 * (m + m.T)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_eigenvalues_match_numpy(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(10):
        m = _random_symmetric(rng, n)
        got = symmetric_eigenvalues(m)
        want = np.linalg.eigvalsh(m)
        assert np.allclose(got, want, atol=1e-12 * max(1.0, np.abs(m).max()))
        assert np.all(np.diff(got) >= 0)  # ascending


def test_eigenvalues_scale_invariance():
    rng = np.random.default_rng(2)
    m = _random_symmetric(rng, 4)
    base = symmetric_eigenvalues(m)
    for scale in (1e-3, 1e3):
        assert np.allclose(symmetric_eigenvalues(scale * m), scale * base,
                           atol=1e-12 * scale)


@pytest.mark.parametrize("shape", [(1, 1), (2, 2), (3, 5), (5, 3), (4, 4)])
def test_singular_values_match_numpy(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(10):
        m = rng.standard_normal(shape)
        got = singular_values(m)
        want = np.linalg.svd(m, compute_uv=False)
        # one value per column: wide matrices carry trailing zeros
        assert len(got) == shape[1]
        padded = np.concatenate([want, np.zeros(max(0, shape[1] - len(want)))])
        assert np.allclose(got, padded, atol=1e-11 * max(1.0, want[0]))
        assert np.all(np.diff(got) <= 0)  # descending


def test_singular_values_of_zero_matrix():
    assert np.allclose(singular_values(np.zeros((3, 2))), [0.0, 0.0])


def test_numeric_rank_detects_deficiency():
    rank, sigma = numeric_rank(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert rank == 1
    assert sigma[1] < 1e-12 * sigma[0]

    # outer-product construction: rank exactly 2 in a 4x4 matrix
    rng = np.random.default_rng(7)
    u = rng.standard_normal((4, 2))
    v = rng.standard_normal((2, 4))
    rank, _ = numeric_rank(u @ v)
    assert rank == 2


def test_numeric_rank_zero_matrix():
    rank, sigma = numeric_rank(np.zeros((2, 3)))
    assert rank == 0
    assert np.allclose(sigma, 0.0)


def test_numeric_rank_relative_threshold():
    m = np.diag([1.0, 1e-6])
    assert numeric_rank(m)[0] == 2          # 1e-6 > 1e-8 * 1
    assert numeric_rank(m, rel_tol=1e-3)[0] == 1


def test_determinant_and_min_eigenvalue():
    m = np.array([[2.0, 0.5], [0.5, 1.0]])
    det, min_eig = determinant_and_min_eigenvalue(m)
    assert abs(det - 1.75) < 1e-12
    assert abs(min_eig - np.linalg.eigvalsh(m)[0]) < 1e-12

    indef = np.diag([-1.0, 3.0])
    det, min_eig = determinant_and_min_eigenvalue(indef)
    assert det < 0 and min_eig == -1.0
