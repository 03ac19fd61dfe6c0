"""
One-step optimizer maps for least squares with loss (1/2n)||Xw - y||^2.
"""

from typing import NamedTuple, Sequence

import numpy as np

from TrajCert.application.models.errors import InvalidInputError


class AdamMoments(NamedTuple):
    m: np.ndarray
    v: np.ndarray
    t: int

    @classmethod
    def zeros(cls, p: int) -> "AdamMoments":
        return cls(np.zeros(p), np.zeros(p), 0)


def full_gradient(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(1/n) X^T (Xw - y)."""
    return (X.T @ (X @ w - y)) / X.shape[0]


def gd_step(w: np.ndarray, X: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    """w - (eta/n) X^T (Xw - y)."""
    return w - (eta / X.shape[0]) * (X.T @ (X @ w - y))


def sgd_step(w: np.ndarray, X: np.ndarray, y: np.ndarray, eta: float, batch: Sequence[int]) -> np.ndarray:
    """gd_step on the rows in batch, normalized by the batch size."""
    index = np.asarray(batch, dtype=np.intp)
    if index.ndim != 1 or index.size == 0:
        raise InvalidInputError("batch must be a nonempty list of indices")
    if index.min() < 0 or index.max() >= X.shape[0]:
        raise InvalidInputError(f"batch index out of range for n={X.shape[0]}")
    return gd_step(w, X[index], y[index], eta)


def adam_step(
    w: np.ndarray,
    moments: AdamMoments,
    grad: np.ndarray,
    eta: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> tuple[np.ndarray, AdamMoments]:
    """Bias-corrected Adam update; returns the new weights and moment state."""
    if moments.m.shape != w.shape or moments.v.shape != w.shape:
        raise InvalidInputError("Adam moments must match the weight dimension")
    t = moments.t + 1
    m = beta1 * moments.m + (1.0 - beta1) * grad
    v = beta2 * moments.v + (1.0 - beta2) * np.square(grad)
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return w - eta * m_hat / (np.sqrt(v_hat) + eps), AdamMoments(m, v, t)
