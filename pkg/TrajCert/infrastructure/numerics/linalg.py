import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import linalg as sla

from TrajCert.application.models.errors import InvalidInputError, NumericalError
from TrajCert.infrastructure.numerics.streams import SeededStream

# Configure logging
logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]

DEFAULT_JITTER_SCALE = 1e-6
DEFAULT_POWER_ITERS = 30
DEFAULT_POWER_TOL = 1e-10
_JITTER_RETRIES = 3


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Validate a finite 2-D float64 array."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return array


def as_vector(value, name: str = "vector") -> np.ndarray:
    """Validate a finite 1-D float64 array."""
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != 1 or array.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 1-D array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return array


def gaussian_with_covariance(stream: SeededStream, n: int, cov_factor: np.ndarray) -> np.ndarray:
    """
    Draw n i.i.d. zero-mean Gaussian rows with covariance cov_factor @ cov_factor.T.

    Args:
        stream: Source of randomness
        n: Number of rows
        cov_factor: Lower-triangular p x p factor of the covariance

    Returns:
        An n x p matrix
    """
    factor = as_matrix(cov_factor, "cov_factor")
    if factor.shape[0] != factor.shape[1]:
        raise InvalidInputError(f"cov_factor must be square, got shape {factor.shape}")
    if n < 1:
        raise InvalidInputError(f"n must be positive, got {n}")
    z = stream.generator().standard_normal((n, factor.shape[0]))
    return z @ factor.T


def factor_with_jitter(A: np.ndarray, jitter_scale: float = DEFAULT_JITTER_SCALE) -> Tuple[np.ndarray, float]:
    """
    Cholesky-factor A + lam*I, lam = jitter_scale * trace(A) / p, growing lam tenfold on failure.

    Returns:
        (L, lam) with L lower triangular and L @ L.T = A + lam*I
    """
    matrix = as_matrix(A, "A")
    p = matrix.shape[0]
    if matrix.shape[1] != p:
        raise InvalidInputError(f"A must be square, got shape {matrix.shape}")
    scale = float(np.max(np.abs(matrix)))
    if not np.allclose(matrix, matrix.T, rtol=1e-10, atol=1e-12 * max(scale, 1.0)):
        raise InvalidInputError("A must be symmetric")
    if jitter_scale < 0:
        raise InvalidInputError(f"jitter_scale must be non-negative, got {jitter_scale}")

    mean_diag = float(np.trace(matrix)) / p
    lam = jitter_scale * mean_diag
    identity = np.eye(p)
    for attempt in range(_JITTER_RETRIES + 1):
        try:
            L = sla.cholesky(matrix + lam * identity, lower=True)
            if attempt:
                logger.debug(f"Cholesky succeeded after {attempt} retries with jitter {lam:.3e}")
            return L, lam
        except sla.LinAlgError:
            if attempt == _JITTER_RETRIES:
                break
            lam = lam * 10.0 if lam > 0 else np.finfo(np.float64).eps * max(abs(mean_diag), 1.0)
    raise NumericalError(f"Cholesky factorization of a {p}x{p} matrix failed", jitter=lam)


def cholesky_with_jitter(A: np.ndarray, jitter_scale: float = DEFAULT_JITTER_SCALE) -> np.ndarray:
    """Lower-triangular Cholesky factor of A plus a trace-relative ridge."""
    L, _ = factor_with_jitter(A, jitter_scale)
    return L


def operator_norm_power_iteration(
    apply: LinearMap,
    apply_adjoint: LinearMap,
    dim: int,
    stream: SeededStream,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
) -> float:
    """
    Estimate the largest singular value of a linear map from matrix-vector products.

    Runs power iteration on apply_adjoint(apply(.)) from a random unit vector and
    returns ||apply(v)|| for the final unit iterate, which never exceeds the true
    operator norm beyond rounding and is non-decreasing in the iteration count.
    """
    if iters < 1:
        raise InvalidInputError(f"iters must be at least 1, got {iters}")
    if dim < 1:
        raise InvalidInputError(f"dim must be positive, got {dim}")

    v = stream.generator().standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for k in range(iters):
        u = apply(v)
        sigma = float(np.linalg.norm(u))
        if sigma == 0.0:
            return 0.0
        converged = k > 0 and abs(sigma - estimate) <= tol * sigma
        estimate = max(estimate, sigma)
        if converged:
            break
        v = apply_adjoint(u)
        norm_v = np.linalg.norm(v)
        if norm_v == 0.0:
            break
        v = v / norm_v
    return estimate


def symmetric_extreme_eigenvalues(
    apply: LinearMap,
    dim: int,
    stream: SeededStream,
    rank_deficient: bool,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
) -> Tuple[float, float]:
    """
    Smallest and largest eigenvalues of a positive semi-definite map.

    The largest comes from power iteration; the smallest is exactly zero for a
    structurally rank-deficient map, otherwise it is read off the shifted map
    lam_max*I - H, itself estimated by power iteration.
    """
    lam_max = operator_norm_power_iteration(apply, apply, dim, stream, iters=iters, tol=tol)
    if rank_deficient or lam_max == 0.0:
        return 0.0, lam_max

    def shifted(v: np.ndarray) -> np.ndarray:
        return lam_max * v - apply(v)

    gap = operator_norm_power_iteration(shifted, shifted, dim, stream.derive(1), iters=iters, tol=tol)
    lam_min = min(max(lam_max - gap, 0.0), lam_max)
    return lam_min, lam_max


@dataclass(frozen=True)
class Interpolant:
    """Minimum-norm interpolating weights and the jitter bookkeeping around them."""

    weights: np.ndarray
    jitter: float
    residual_norm: float
    residual_bound: float


def min_norm_interpolator(
    X: np.ndarray,
    y: np.ndarray,
    jitter_scale: float = DEFAULT_JITTER_SCALE,
    refine_steps: int = 2,
) -> Interpolant:
    """
    Minimum-l2-norm solution of Xw = y for an underdetermined design.

    Solves w = X.T @ (XX^T + lam*I)^{-1} y and then refines the dual coefficients
    against the exact residual; w stays in the row space of X throughout.

    Args:
        X: n x p design with n <= p
        y: Length-n targets
        jitter_scale: Relative ridge handed to the Cholesky factorization
        refine_steps: Iterative refinement passes

    Returns:
        Interpolant with the weights, final jitter, achieved residual and the
        jitter residual bound lam * ||(XX^T + lam*I)^{-1} y|| * ||X||_op
    """
    design = as_matrix(X, "X")
    targets = as_vector(y, "y")
    n, p = design.shape
    if n > p:
        raise InvalidInputError(f"min-norm interpolation needs n <= p, got n={n}, p={p}")
    if targets.shape[0] != n:
        raise InvalidInputError(f"y has length {targets.shape[0]}, expected {n}")

    L, lam = factor_with_jitter(design @ design.T, jitter_scale)
    alpha = sla.cho_solve((L, True), targets)
    residual_bound = lam * float(np.linalg.norm(alpha)) * float(np.linalg.norm(design, 2))
    weights = design.T @ alpha
    for _ in range(refine_steps):
        alpha = alpha + sla.cho_solve((L, True), targets - design @ weights)
        weights = design.T @ alpha
    residual_norm = float(np.linalg.norm(design @ weights - targets))
    return Interpolant(weights=weights, jitter=lam, residual_norm=residual_norm, residual_bound=residual_bound)
