import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geolowrank.linalg import (GRAM_MIN_DIM, best_rank_r_error, interpolative_decomposition, pinv_norm,
                               qr_column_pivoted, singular_values, spectral_norm, truncated_pinv)


def low_rank(rng, m, n, k):
    return rng.standard_normal((m, k)) @ rng.standard_normal((k, n))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 60), st.integers(1, 40), st.integers(0, 2**32 - 1), st.data())
def test_id_coefficients_bounded_and_exact_on_rank_k(m, c, seed, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(1, min(m, c)))
    M = low_rank(rng, m, c, k)
    idd = interpolative_decomposition(M, k)
    assert idd.max_coeff <= 2.0
    U = idd.interpolation_matrix()
    assert np.array_equal(U[idd.skeleton], np.eye(k))
    res = np.abs(M - U @ M[idd.skeleton]).max()
    assert res <= 1e-10 * np.abs(M).max()


def test_id_swaps_enforce_tighter_bound(rng):
    # nearly dependent rows make plain pivoted QR produce large coefficients
    M = rng.standard_normal((80, 12)) @ np.diag(np.logspace(0, -6, 12)) @ rng.standard_normal((12, 12))
    for s in (1.05, 1.5, 2.0):
        idd = interpolative_decomposition(M, 12, s=s)
        assert idd.max_coeff <= s


def test_id_rank_deficient_input_is_padded(rng):
    M = low_rank(rng, 30, 10, 3)
    idd = interpolative_decomposition(M, 6)
    assert idd.rank == 6 and idd.numerical_rank == 3
    assert np.unique(idd.skeleton).size == 6
    assert np.allclose(idd.interpolation_matrix() @ M[idd.skeleton], M)
    assert interpolative_decomposition(np.zeros((4, 3)), 2).max_coeff == 0.0


def test_id_argument_errors(rng):
    M = rng.random((5, 4))
    with pytest.raises(ValueError):
        interpolative_decomposition(M, 5)
    with pytest.raises(ValueError):
        interpolative_decomposition(M, 2, s=1.0)


def test_pivoted_qr(rng):
    M = rng.random((9, 6))
    Q, R, perm = qr_column_pivoted(M)
    assert np.allclose(Q @ R, M[:, perm])
    d = np.abs(np.diag(R))
    assert np.all(d[:-1] >= d[1:])


def test_truncated_pinv_matches_svd_pinv(rng):
    M = rng.random((8, 8))
    tp = truncated_pinv(M, eps=0.0)
    assert tp.rank == 8
    assert np.allclose(tp.operator(), np.linalg.pinv(M))
    assert np.allclose(tp.left @ tp.right, tp.operator())


def test_truncated_pinv_drops_small_singular_values(rng):
    U, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    V, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    s = np.array([1, 1e-2, 1e-5, 1e-9, 1e-12, 1e-15])
    M = (U * s) @ V.T
    tp = truncated_pinv(M, eps=1e-10)
    assert tp.rank == 4
    ref = (V[:, :4] / s[:4]) @ U[:, :4].T
    assert np.allclose(tp.operator(), ref, rtol=1e-5, atol=1e-3)
    assert truncated_pinv(np.zeros((3, 3))).rank == 0
    with pytest.raises(ValueError):
        truncated_pinv(M, eps=-1)


def power_iteration_norm(M, iters=500):
    v = np.ones(M.shape[1])
    for _ in range(iters):
        v = M.T @ (M @ v)
        v /= np.linalg.norm(v)
    return np.linalg.norm(M @ v)


@pytest.mark.parametrize("shape", [(30, 50), (GRAM_MIN_DIM + 10, 260), (300, GRAM_MIN_DIM)])
def test_spectral_norm_both_paths(rng, shape):
    M = rng.standard_normal(shape)
    ref = np.linalg.svd(M, compute_uv=False)[0]
    assert spectral_norm(M) == pytest.approx(ref, rel=1e-12)
    assert spectral_norm(M) == pytest.approx(power_iteration_norm(M), rel=1e-6)


def test_spectral_norm_of_low_rank_difference(rng):
    # error matrices are small and nearly low rank; the Gram path must stay accurate
    M = 1e-7 * low_rank(rng, 400, 300, 5) + 1e-12 * rng.standard_normal((400, 300))
    assert spectral_norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-10)
    assert spectral_norm(np.zeros((250, 250))) == 0.0


def test_best_rank_error_and_pinv_norm(rng):
    U, _ = np.linalg.qr(rng.standard_normal((10, 5)))
    V, _ = np.linalg.qr(rng.standard_normal((7, 5)))
    s = np.array([4.0, 2.0, 1.0, 0.5, 0.0])
    M = (U * s) @ V.T
    assert best_rank_r_error(M, 1) == pytest.approx(0.5)
    assert best_rank_r_error(M, 3) == pytest.approx(0.125)
    assert best_rank_r_error(M, 7) == 0.0
    assert pinv_norm(M) == pytest.approx(2.0)
    assert pinv_norm(M) == pytest.approx(np.linalg.norm(np.linalg.pinv(M), 2))
    assert np.allclose(singular_values(M)[:4], s[:4])
