import numpy as np
import pytest

from rscompress import dense
from rscompress.synthetic import planted_spectrum


def test_qr_identity_full():
    q, r, jc = dense.qr(np.eye(3))
    assert np.allclose(np.abs(q).sum(axis=0), 1)  # permutation columns
    assert np.allclose(np.abs(np.diag(r)), 1)
    assert np.allclose(np.eye(3)[:, jc], q @ r)


def test_qr_rank_one_tolerance():
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([1.0, 1.0])
    a = np.outer(u, v)
    q, r, jc = dense.qr(a, dense.tolerance(1e-12))
    assert q.shape == (3, 1)
    assert np.linalg.norm(a[:, jc] - q @ r) <= 1e-12 * 3


def test_qr_full_rank_round_trip():
    rng = dense.make_rng(11)
    a = rng.standard_normal((50, 50))
    q, r, jc = dense.qr(a, dense.fixed_rank(50))
    assert np.linalg.norm(a[:, jc] - q @ r) <= 1e-12 * np.linalg.norm(a, 2)
    d = np.abs(np.diag(r))
    assert np.all(np.diff(d) <= 1e-12 * d[0])


def test_svd_diagonal_fixed_rank():
    u, s, v = dense.svd(np.diag([3.0, 2.0, 1.0]), dense.fixed_rank(2))
    assert np.allclose(s, [3.0, 2.0])
    err = np.linalg.norm(np.diag([3.0, 2.0, 1.0]) - (u * s) @ v.T, 2)
    assert abs(err - 1.0) <= 1e-12


def test_svd_zero_matrix_tolerance():
    u, s, v = dense.svd(np.zeros((4, 4)), dense.tolerance(1e-9))
    assert u.shape == (4, 0) and s.shape == (0,) and v.shape == (4, 0)


def test_svd_planted_spectrum_truncation():
    svals = 10.0 ** -np.arange(1, 21)
    a = planted_spectrum(30, 20, svals, seed=5)
    u, s, v = dense.svd(a, dense.tolerance(1e-5))
    assert len(s) == 5


def test_svd_matches_gram_eigenvalues():
    rng = dense.make_rng(3)
    a = rng.standard_normal((40, 25))
    _, s, _ = dense.svd(a)
    lam = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
    assert np.allclose(s, np.sqrt(np.clip(lam, 0, None)), rtol=1e-10)


def test_id_rank_one_example():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    x, j, k = dense.id_decompose(a, dense.tolerance(1e-12))
    assert k == 1
    assert j[0] == 1  # the larger column is the skeleton
    assert np.allclose(x, [[0.5, 1.0]])


def test_id_identity_fixed_rank():
    x, j, k = dense.id_decompose(np.eye(3), dense.fixed_rank(3))
    assert k == 3
    assert np.array_equal(np.sort(j), np.arange(3))
    assert np.array_equal(x[:, j[:3]], np.eye(3))


def test_id_planted_rank_four():
    rng = dense.make_rng(7)
    a = rng.standard_normal((10, 4)) @ rng.standard_normal((4, 10))
    x, j, k = dense.id_decompose(a, dense.tolerance(1e-10))
    assert k == 4
    res = np.linalg.norm(a - a[:, j[:k]] @ x, 2)
    assert res <= 1e-10 * np.linalg.norm(a, 2)
    assert np.array_equal(x[:, j[:k]], np.eye(k))


def test_rejects_empty_and_overlarge_rank():
    with pytest.raises(ValueError):
        dense.svd(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        dense.svd(np.ones((3, 2)), dense.fixed_rank(3))
    with pytest.raises(ValueError):
        dense.qr(np.ones((3, 2)), dense.fixed_rank(3))


def test_gaussian_block_determinism_and_moments():
    a = dense.gaussian_block(1, 1, 42)
    b = dense.gaussian_block(1, 1, 42)
    assert a == b
    c = dense.gaussian_block(3, 2, 1)
    d = dense.gaussian_block(3, 2, 2)
    assert not np.array_equal(c, d)
    g = dense.gaussian_block(10_000, 1, 0)
    assert abs(g.mean()) < 0.05
    assert 0.9 < g.var() < 1.1


def test_randomized_range_zero_map():
    q = dense.randomized_range(lambda w: np.zeros((8, w.shape[1])), 6, 2, 3, seed=0)
    assert q.shape == (8, 0)


def test_randomized_range_rank_one():
    u = np.array([1.0, -2.0, 0.5, 3.0])
    v = np.array([2.0, 1.0, 1.0])
    a = np.outer(u, v)
    q = dense.randomized_range(lambda w: a @ w, 3, 1, 2, seed=1)
    assert np.linalg.norm(a - q @ (q.T @ a), 2) <= 1e-12 * np.linalg.norm(a, 2)
    assert np.linalg.norm(q.T @ q - np.eye(q.shape[1])) <= 1e-13 * q.shape[1] + 1e-15


def test_randomized_range_rejects_oversampling_overflow():
    with pytest.raises(ValueError):
        dense.randomized_range(lambda w: w, 4, 3, 2, seed=0)


def test_factorization_round_trips_random_matrices():
    """qr/svd/id reconstruction across all three modes on random shapes."""
    rng = dense.make_rng(123)
    for trial in range(1000):
        m = int(rng.integers(1, 60)) if trial % 10 else int(rng.integers(100, 200))
        n = int(rng.integers(1, 60)) if trial % 10 else int(rng.integers(100, 200))
        a = rng.standard_normal((m, n))
        nrm = np.linalg.norm(a, 2)
        mode = (dense.full(), dense.fixed_rank(min(m, n)),
                dense.tolerance(1e-10, relative=True))[trial % 3]

        q, r, jc = dense.qr(a, mode)
        assert np.linalg.norm(a[:, jc] - q @ r) <= 1e-10 * max(nrm, 1)

        u, s, v = dense.svd(a, mode)
        assert np.linalg.norm(a - (u * s) @ v.T) <= 1e-10 * max(nrm, 1)
        assert np.all(np.diff(s) <= 1e-12 * (s[0] if len(s) else 1))

        x, j, k = dense.id_decompose(a, mode)
        assert np.linalg.norm(a - a[:, j[:k]] @ x) <= 1e-9 * max(nrm, 1)
        assert np.array_equal(x[:, j[:k]], np.eye(k))
