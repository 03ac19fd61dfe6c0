import logging
from functools import lru_cache

import numpy as np
from scipy import linalg as sla

from TrajCert.application.models.domain import Dataset, NeighborPair, ProbeSet, frozen_array
from TrajCert.application.models.errors import InvalidInputError, NumericalError
from TrajCert.application.models.model_configs import (
    LabelMode,
    LabelsMode,
    ReplacementKind,
    SelectionMode,
    SignalKind,
    SpectrumSpec,
)
from TrajCert.infrastructure.numerics.linalg import (
    DEFAULT_JITTER_SCALE,
    as_matrix,
    cholesky_with_jitter,
    gaussian_with_covariance,
)
from TrajCert.infrastructure.numerics.streams import SeededStream

# Configure logging
logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def covariance_factor(spec: SpectrumSpec, jitter_scale: float = DEFAULT_JITTER_SCALE) -> np.ndarray:
    """Cholesky factor of the population covariance of a spectrum (cached, read-only)."""
    factor = cholesky_with_jitter(np.diag(spec.covariance_diagonal()), jitter_scale)
    factor.setflags(write=False)
    return factor


def draw_signal(spec: SpectrumSpec, signal: SignalKind, stream: SeededStream) -> np.ndarray:
    """w* ~ N(0, I/p), or N(0, I/k) on the k spike coordinates for a spiked signal."""
    rng = stream.generator()
    if signal == SignalKind.ISOTROPIC:
        return rng.standard_normal(spec.p) / np.sqrt(spec.p)
    k = spec.spike_count
    if k < 1:
        raise InvalidInputError("a spiked signal needs a spectrum with spike_count >= 1")
    w_star = np.zeros(spec.p)
    w_star[:k] = rng.standard_normal(k) / np.sqrt(k)
    return w_star


def make_dataset(
    spec: SpectrumSpec,
    n: int,
    sigma: float,
    stream: SeededStream,
    signal: SignalKind = SignalKind.ISOTROPIC,
    jitter_scale: float = DEFAULT_JITTER_SCALE,
) -> Dataset:
    """
    Draw a regression sample y = X w* + noise.

    Args:
        spec: Covariance spectrum of the rows of X
        n: Number of training rows
        sigma: Noise standard deviation
        stream: Data stream; X, w* and the noise use fixed sub-streams of it
        signal: How w* is drawn
        jitter_scale: Relative ridge for the covariance factorization

    Returns:
        A Dataset with frozen arrays
    """
    if n < 1:
        raise InvalidInputError(f"n must be positive, got {n}")
    if not sigma >= 0:
        raise InvalidInputError(f"sigma must be non-negative, got {sigma}")

    X = gaussian_with_covariance(stream.derive(0), n, covariance_factor(spec, jitter_scale))
    w_star = draw_signal(spec, signal, stream.derive(1))
    noise = sigma * stream.derive(2).generator().standard_normal(n)
    y = X @ w_star + noise
    logger.debug(f"Generated dataset n={n} p={spec.p} sigma={sigma} from {stream}")
    return Dataset(
        X=frozen_array(X),
        y=frozen_array(y),
        w_star=frozen_array(w_star),
        noise=frozen_array(noise),
        sigma=float(sigma),
        spectrum=spec,
        source=stream,
        signal=signal,
    )


def make_probe_and_test(
    spec: SpectrumSpec,
    w_star: np.ndarray,
    sigma: float,
    m_probe: int,
    n_test: int,
    stream: SeededStream,
    jitter_scale: float = DEFAULT_JITTER_SCALE,
) -> ProbeSet:
    """Probe design and labelled test set from the training distribution; stream must not be a training stream."""
    factor = covariance_factor(spec, jitter_scale)
    X_probe = gaussian_with_covariance(stream.derive(0), m_probe, factor)
    X_test = gaussian_with_covariance(stream.derive(1), n_test, factor)
    y_test = X_test @ np.asarray(w_star) + sigma * stream.derive(2).generator().standard_normal(n_test)
    return ProbeSet(X_probe=frozen_array(X_probe), X_test=frozen_array(X_test), y_test=frozen_array(y_test))


def leverage_scores(X: np.ndarray, ridge: float) -> np.ndarray:
    """
    Ridge leverage scores x_i^T (X^T X + ridge*I)^{-1} x_i.

    Computed in the n x n form 1 - ridge * diag((XX^T + ridge*I)^{-1}).
    """
    design = as_matrix(X, "X")
    if not ridge > 0:
        raise InvalidInputError(f"ridge must be positive, got {ridge}")
    return 1.0 - ridge * _inverse_gram_diagonal(design, ridge)


def high_leverage_index(X: np.ndarray, ridge: float) -> int:
    """Index of the largest leverage score, ties to the lowest index."""
    design = as_matrix(X, "X")
    if not ridge > 0:
        raise InvalidInputError(f"ridge must be positive, got {ridge}")
    # argmax of the score is argmin of the inverse diagonal, without the cancellation
    return int(np.argmin(_inverse_gram_diagonal(design, ridge)))


def _inverse_gram_diagonal(design: np.ndarray, ridge: float) -> np.ndarray:
    n = design.shape[0]
    gram = design @ design.T + ridge * np.eye(n)
    try:
        factor = sla.cho_factor(gram, lower=True)
    except sla.LinAlgError as e:
        raise NumericalError(f"leverage factorization failed: {e}", jitter=ridge) from e
    return np.diag(sla.cho_solve(factor, np.eye(n)))


def leverage_ridge(X: np.ndarray, jitter_scale: float = DEFAULT_JITTER_SCALE) -> float:
    """jitter_scale * trace(X^T X) / p."""
    return jitter_scale * float(np.sum(np.square(X))) / X.shape[1]


def make_neighbor(
    base: Dataset,
    selection: SelectionMode,
    stream: SeededStream,
    label_mode: LabelMode = LabelMode.MARGINAL,
    replacement: ReplacementKind = ReplacementKind.EMPIRICAL,
    jitter_scale: float = DEFAULT_JITTER_SCALE,
) -> NeighborPair:
    """
    Replace one (row, label) of base by a fresh draw.

    The index comes from stream.derive(0) (random_index) or from the ridge leverage
    scores (high_leverage); the replacement row and label always come from
    stream.derive(1) and stream.derive(2), so both selections of one base share the
    replacement. SelectionMode.IDENTITY returns the pair (base, base).
    """
    n = base.n
    if n < 2:
        raise InvalidInputError(f"neighbors need n >= 2, got n={n}")
    if selection == SelectionMode.IDENTITY:
        return NeighborPair(base, base, 0, selection, label_mode, replacement)

    if selection == SelectionMode.RANDOM_INDEX:
        index = int(stream.derive(0).generator().integers(n))
    else:
        index = high_leverage_index(base.X, leverage_ridge(base.X, jitter_scale))

    if replacement == ReplacementKind.EMPIRICAL:
        empirical = np.atleast_2d(np.cov(base.X, rowvar=False, bias=True))
        factor = cholesky_with_jitter(empirical, jitter_scale)
    else:
        factor = covariance_factor(base.spectrum, jitter_scale)
    new_row = gaussian_with_covariance(stream.derive(1), 1, factor)[0]

    z = float(stream.derive(2).generator().standard_normal())
    if label_mode == LabelMode.MARGINAL:
        new_label = float(np.mean(base.y)) + float(np.std(base.y)) * z
    else:
        new_label = float(new_row @ base.w_star) + base.sigma * z

    X = np.array(base.X)
    y = np.array(base.y)
    noise = np.array(base.noise)
    X[index] = new_row
    y[index] = new_label
    noise[index] = new_label - float(new_row @ base.w_star)
    neighbor = Dataset(
        X=frozen_array(X),
        y=frozen_array(y),
        w_star=base.w_star,
        noise=frozen_array(noise),
        sigma=base.sigma,
        spectrum=base.spectrum,
        source=base.source,
        signal=base.signal,
        labels=base.labels,
    )
    logger.debug(f"Neighbor built by {selection.value}: replaced index {index}")
    return NeighborPair(base, neighbor, index, selection, label_mode, replacement)


def apply_permutation(base: Dataset, perm: np.ndarray) -> Dataset:
    """Relabel base with y[perm]; the noise record is rewritten so y = X w* + noise still holds."""
    order = np.asarray(perm)
    if order.shape != (base.n,) or not np.array_equal(np.sort(order), np.arange(base.n)):
        raise InvalidInputError(f"perm must be a permutation of range({base.n})")
    y = base.y[order]
    return Dataset(
        X=base.X,
        y=frozen_array(y),
        w_star=base.w_star,
        noise=frozen_array(y - base.X @ base.w_star),
        sigma=base.sigma,
        spectrum=base.spectrum,
        source=base.source,
        signal=base.signal,
        labels=LabelsMode.PERMUTED,
    )


def permute_labels(base: Dataset, stream: SeededStream) -> Dataset:
    """Uniformly permute the labels of base; X, w* and sigma are unchanged."""
    if base.n < 2:
        raise InvalidInputError(f"label permutation needs n >= 2, got n={base.n}")
    return apply_permutation(base, stream.generator().permutation(base.n))
