import logging
from typing import List, Optional

import numpy as np

from TrajCert.application.models.domain import CoupledTrajectory, NeighborPair, ProbeSet, frozen_array
from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import OptimizerSpec
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId
from TrajCert.infrastructure.optim.factory import OptimizerFactory

# Configure logging
logger = logging.getLogger(__name__)


def init_weights(p: int, stream: SeededStream, init_scale: float = 0.0) -> np.ndarray:
    """w0 ~ N(0, init_scale^2 I); exactly zero when init_scale is 0."""
    if p < 1:
        raise InvalidInputError(f"p must be positive, got {p}")
    if init_scale < 0:
        raise InvalidInputError(f"init_scale must be non-negative, got {init_scale}")
    if init_scale == 0.0:
        return np.zeros(p)
    return init_scale * stream.generator().standard_normal(p)


def minibatch_schedule(n: int, batch_size: int, T: int, stream: SeededStream) -> List[np.ndarray]:
    """
    T minibatches drawn without replacement within each epoch.

    Every epoch is a fresh permutation of range(n) cut into consecutive chunks; the
    last chunk of an epoch is short when batch_size does not divide n.
    """
    if n < 1 or batch_size < 1 or T < 0:
        raise InvalidInputError(f"invalid schedule n={n}, batch_size={batch_size}, T={T}")
    size = min(batch_size, n)
    rng = stream.generator()
    batches: List[np.ndarray] = []
    while len(batches) < T:
        order = rng.permutation(n)
        for start in range(0, n, size):
            batches.append(order[start : start + size])
            if len(batches) == T:
                break
    return batches


def mse(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """(1/n) ||Xw - y||^2."""
    residual = X @ w - y
    return float(residual @ residual) / X.shape[0]


def probe_rms(delta: np.ndarray, X_probe: np.ndarray) -> float:
    """RMS prediction difference of two predictors on the probe design."""
    return float(np.linalg.norm(X_probe @ delta)) / np.sqrt(X_probe.shape[0])


def run_coupled(
    pair: NeighborPair,
    probes: ProbeSet,
    opt: OptimizerSpec,
    T: int,
    stream: SeededStream,
    init_scale: float = 0.0,
) -> CoupledTrajectory:
    """
    Train on S and S' under shared algorithmic randomness.

    The initialization comes from stream.with_id(INIT) and the minibatch sequence
    from stream.with_id(MINIBATCH); both runs use the same draws.

    Args:
        pair: The neighboring datasets
        probes: Probe design and test set
        opt: Optimizer kind and hyperparameters
        T: Number of steps
        stream: Algorithmic randomness U
        init_scale: Standard deviation of the Gaussian initialization

    Returns:
        The coupled trajectory, truncated at the first non-finite iterate
    """
    if T < 1:
        raise InvalidInputError(f"T must be at least 1, got {T}")
    S, S_prime = pair.base, pair.neighbor
    optimizer = OptimizerFactory.create_optimizer(opt)

    w0 = init_weights(S.p, stream.with_id(StreamId.INIT), init_scale)
    batches: Optional[List[np.ndarray]] = None
    if optimizer.uses_minibatches:
        batches = minibatch_schedule(S.n, opt.batch_size, T, stream.with_id(StreamId.MINIBATCH))

    w, w_prime = w0.copy(), w0.copy()
    state, state_prime = optimizer.init_state(w0), optimizer.init_state(w0)
    iterates, iterates_prime = [w], [w_prime]
    diverged_at = None
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            batch = batches[t] if batches is not None else None
            w_next, state = optimizer.step(w, state, S.X, S.y, batch)
            w_next_prime, state_prime = optimizer.step(w_prime, state_prime, S_prime.X, S_prime.y, batch)
            if not (np.all(np.isfinite(w_next)) and np.all(np.isfinite(w_next_prime))):
                diverged_at = t + 1
                break
            w, w_prime = w_next, w_next_prime
            iterates.append(w)
            iterates_prime.append(w_prime)

        W = np.vstack(iterates)
        W_prime = np.vstack(iterates_prime)
        train = np.array([mse(v, S.X, S.y) for v in W])
        train_prime = np.array([mse(v, S_prime.X, S_prime.y) for v in W_prime])
        test = np.array([mse(v, probes.X_test, probes.y_test) for v in W])
        test_prime = np.array([mse(v, probes.X_test, probes.y_test) for v in W_prime])

    finite = np.isfinite(train) & np.isfinite(train_prime) & np.isfinite(test) & np.isfinite(test_prime)
    if not np.all(finite):
        # losses overflow before the weights do
        last = int(np.argmin(finite))
        diverged_at = last if diverged_at is None else min(diverged_at, last)
        W, W_prime = W[:last], W_prime[:last]
        train, train_prime = train[:last], train_prime[:last]
        test, test_prime = test[:last], test_prime[:last]
    if diverged_at is not None:
        logger.warning(f"{opt.kind.value} eta={opt.eta} diverged at step {diverged_at}; trajectory truncated")

    delta = W - W_prime
    kept = W.shape[0] - 1
    return CoupledTrajectory(
        optimizer=opt.kind,
        eta=opt.eta,
        w=frozen_array(W),
        w_prime=frozen_array(W_prime),
        delta_norm=frozen_array(np.linalg.norm(delta, axis=1)),
        train_mse=frozen_array(train),
        train_mse_prime=frozen_array(train_prime),
        test_mse=frozen_array(test),
        test_mse_prime=frozen_array(test_prime),
        probe_disc=frozen_array(np.linalg.norm(delta @ probes.X_probe.T, axis=1) / np.sqrt(probes.X_probe.shape[0])),
        replaced_index=pair.replaced_index,
        requested_steps=T,
        minibatch_indices=tuple(batches[:kept]) if batches is not None else None,
        diverged_at=diverged_at,
    )
