import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrajCert.application.models.errors import InvalidInputError
from TrajCert.infrastructure.numerics.linalg import (
    cholesky_with_jitter,
    factor_with_jitter,
    min_norm_interpolator,
    operator_norm_power_iteration,
    symmetric_extreme_eigenvalues,
)
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId


def test_stream_replays_identical_draws():
    first = SeededStream(7, StreamId.DATA).derive(2, 5).generator().standard_normal(10)
    second = SeededStream(7, StreamId.DATA).derive(2, 5).generator().standard_normal(10)
    assert np.array_equal(first, second)


def test_stream_ids_and_paths_are_independent():
    base = SeededStream(7, StreamId.DATA)
    draws = [
        base.generator().standard_normal(5),
        base.with_id(StreamId.INIT).generator().standard_normal(5),
        base.derive(0).generator().standard_normal(5),
        base.derive(1).generator().standard_normal(5),
    ]
    for i in range(len(draws)):
        for j in range(i + 1, len(draws)):
            assert not np.array_equal(draws[i], draws[j])


def test_stream_rejects_out_of_range_seed():
    with pytest.raises(InvalidInputError):
        SeededStream(-1, StreamId.DATA)
    with pytest.raises(InvalidInputError):
        SeededStream(2**64, StreamId.DATA)


def test_cholesky_jitter_recovers_singular_matrix(rng):
    B = rng.standard_normal((6, 3))
    A = B @ B.T
    L, lam = factor_with_jitter(A, 1e-6)
    assert lam > 0
    assert_allclose(L @ L.T, A + lam * np.eye(6), rtol=1e-10, atol=1e-12)
    assert np.allclose(np.triu(L, 1), 0.0)


def test_cholesky_rejects_asymmetric_input():
    with pytest.raises(InvalidInputError):
        cholesky_with_jitter(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_power_iteration_on_diagonal_map():
    D = np.diag([3.0, 1.0])
    estimate = operator_norm_power_iteration(lambda v: D @ v, lambda v: D.T @ v, 2, SeededStream(0, StreamId.POWER), iters=200)
    assert estimate == pytest.approx(3.0, rel=1e-8)
    assert estimate <= 3.0 * (1 + 1e-12)


def test_power_iteration_on_zero_map():
    zero = lambda v: np.zeros_like(v)  # noqa: E731
    assert operator_norm_power_iteration(zero, zero, 4, SeededStream(0, StreamId.POWER)) == 0.0


def test_power_iteration_matches_dense_svd():
    for j in range(20):
        M = SeededStream(0, StreamId.POWER).derive(j, 0).generator().standard_normal((16, 16))
        estimate = operator_norm_power_iteration(
            lambda v: M @ v, lambda v: M.T @ v, 16, SeededStream(0, StreamId.POWER).derive(j, 1), iters=5000, tol=1e-13
        )
        assert estimate == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-6)


def test_power_iteration_never_overshoots_with_few_iterations(rng):
    M = rng.standard_normal((12, 8))
    top = np.linalg.svd(M, compute_uv=False)[0]
    for iters in (1, 2, 5):
        estimate = operator_norm_power_iteration(lambda v: M @ v, lambda v: M.T @ v, 8, SeededStream(1, StreamId.POWER), iters=iters)
        assert estimate <= top * (1 + 1e-12)


def test_extreme_eigenvalues_of_full_rank_map():
    H = np.diag([4.0, 2.0, 1.0])
    lam_min, lam_max = symmetric_extreme_eigenvalues(
        lambda v: H @ v, 3, SeededStream(0, StreamId.POWER), rank_deficient=False, iters=500, tol=0.0
    )
    assert lam_max == pytest.approx(4.0, rel=1e-8)
    assert lam_min == pytest.approx(1.0, rel=1e-6)


def test_extreme_eigenvalues_of_rank_deficient_map(rng):
    X = rng.standard_normal((3, 6))
    lam_min, lam_max = symmetric_extreme_eigenvalues(
        lambda v: X.T @ (X @ v), 6, SeededStream(0, StreamId.POWER), rank_deficient=True, iters=500
    )
    assert lam_min == 0.0
    assert lam_max == pytest.approx(np.linalg.eigvalsh(X.T @ X)[-1], rel=1e-8)


def test_min_norm_interpolator_matches_pseudoinverse(rng):
    X = rng.standard_normal((5, 12))
    y = rng.standard_normal(5)
    fit = min_norm_interpolator(X, y)
    assert fit.residual_norm < 1e-10
    assert_allclose(fit.weights, np.linalg.pinv(X) @ y, rtol=1e-8, atol=1e-10)


def test_min_norm_interpolator_is_orthogonal_to_null_space(rng):
    X = rng.standard_normal((4, 10))
    y = rng.standard_normal(4)
    fit = min_norm_interpolator(X, y)
    _, _, Vt = np.linalg.svd(X)
    null_basis = Vt[4:]
    assert np.max(np.abs(null_basis @ fit.weights)) < 1e-10


def test_min_norm_interpolator_needs_underdetermined_design(rng):
    with pytest.raises(InvalidInputError):
        min_norm_interpolator(rng.standard_normal((6, 4)), rng.standard_normal(6))
    with pytest.raises(InvalidInputError):
        min_norm_interpolator(rng.standard_normal((3, 4)), rng.standard_normal(4))
