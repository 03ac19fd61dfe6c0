from .linalg import (
    Interpolant,
    cholesky_with_jitter,
    factor_with_jitter,
    gaussian_with_covariance,
    min_norm_interpolator,
    operator_norm_power_iteration,
    symmetric_extreme_eigenvalues,
)
from .streams import SeededStream, StreamId

__all__ = [
    "Interpolant",
    "SeededStream",
    "StreamId",
    "cholesky_with_jitter",
    "factor_with_jitter",
    "gaussian_with_covariance",
    "min_norm_interpolator",
    "operator_norm_power_iteration",
    "symmetric_extreme_eigenvalues",
]
