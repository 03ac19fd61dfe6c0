import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from TrajCert.application.models.domain import (
    BoundReport,
    CertificateReport,
    ContractivityProfile,
    CoupledTrajectory,
    Dataset,
    NeighborOutcome,
    NeighborPair,
    ProbeSet,
    UnrolledCertificate,
    frozen_array,
)
from TrajCert.application.models.errors import InvalidInputError, InvariantViolationError
from TrajCert.application.models.model_configs import (
    InjectionMode,
    LabelMode,
    OptimizerKind,
    OptimizerSpec,
    ProfileMethod,
    ReplacementKind,
    SelectionMode,
)
from TrajCert.application.services.datagen_service import make_neighbor
from TrajCert.application.services.dynamics_service import run_coupled
from TrajCert.infrastructure.numerics.linalg import (
    DEFAULT_JITTER_SCALE,
    DEFAULT_POWER_ITERS,
    DEFAULT_POWER_TOL,
    symmetric_extreme_eigenvalues,
)
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId
from TrajCert.orchestration.selectors.strategy_selector import Strategy, StrategySelector

# Configure logging
logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.0 + 1e-6
BOUND_RTOL = 1e-9
BOUND_ATOL = 1e-12


def unroll(a: Sequence[float], b: Sequence[float]) -> UnrolledCertificate:
    """
    Certificate prefixes Cert_0 = 0, Cert_{t+1} = a_t Cert_t + b_t.

    The forward recursion is cross-checked against the sum-of-products form
    Cert_t = sum_s (prod_{s<k<t} a_k) b_s; the largest relative disagreement is
    returned with the prefixes.
    """
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if a_arr.ndim != 1 or a_arr.shape != b_arr.shape:
        raise InvalidInputError(f"a and b must be 1-D of equal length, got {a_arr.shape} and {b_arr.shape}")
    if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise InvalidInputError("a and b must be finite")
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise InvalidInputError("profile coefficients must be non-negative")

    T = a_arr.shape[0]
    prefix = np.zeros(T + 1)
    cert = 0.0
    for t in range(T):
        cert = float(a_arr[t]) * cert + float(b_arr[t])
        prefix[t + 1] = cert

    deviation = 0.0
    for t in range(1, T + 1):
        weights = np.ones(t)
        if t > 1:
            weights[:-1] = np.cumprod(a_arr[1:t][::-1])[::-1]
        direct = float(weights @ b_arr[:t])
        scale = max(abs(direct), abs(prefix[t]))
        if scale > 0:
            deviation = max(deviation, abs(direct - prefix[t]) / scale)
    return UnrolledCertificate(prefix=frozen_array(prefix), max_deviation=deviation)


def propagation_factor(
    X_B: np.ndarray,
    eta: float,
    stream: SeededStream,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
) -> float:
    """||I - (eta/m) X_B^T X_B||_op from matrix-vector products with X_B only."""
    m, p = X_B.shape
    lam_min, lam_max = symmetric_extreme_eigenvalues(
        lambda v: X_B.T @ (X_B @ v) / m, p, stream, rank_deficient=m < p, iters=iters, tol=tol
    )
    return max(abs(1.0 - eta * lam_min), abs(1.0 - eta * lam_max))


def sharpness(
    X: np.ndarray, stream: SeededStream, iters: int = DEFAULT_POWER_ITERS, tol: float = DEFAULT_POWER_TOL
) -> float:
    """lambda_max(X^T X / n)."""
    n, p = X.shape
    _, lam_max = symmetric_extreme_eigenvalues(
        lambda v: X.T @ (X @ v) / n, p, stream, rank_deficient=True, iters=iters, tol=tol
    )
    return lam_max


def _check_trajectory(traj: CoupledTrajectory, X_S: np.ndarray, kind: OptimizerKind) -> None:
    if traj.optimizer != kind:
        raise InvalidInputError(f"expected a {kind.value} trajectory, got {traj.optimizer.value}")
    if X_S.shape[1] != traj.w.shape[1]:
        raise InvalidInputError(f"X_S has {X_S.shape[1]} columns, trajectory has dimension {traj.w.shape[1]}")


def _gradient_bound(pair: Optional[NeighborPair], w_prime: np.ndarray, scale: float) -> float:
    """scale * (||x_i|| |x_i^T w' - y_i| + ||x'_i|| |x'_i^T w' - y'_i|)."""
    if pair is None:
        raise InvalidInputError("the gradient_bound injection needs the neighbor pair")
    i = pair.replaced_index
    x, x_new = pair.base.X[i], pair.neighbor.X[i]
    r = float(x @ w_prime) - float(pair.base.y[i])
    r_new = float(x_new @ w_prime) - float(pair.neighbor.y[i])
    return scale * (float(np.linalg.norm(x)) * abs(r) + float(np.linalg.norm(x_new)) * abs(r_new))


def _profile(a: np.ndarray, b: np.ndarray, method: ProfileMethod, injection: InjectionMode) -> ContractivityProfile:
    unrolled = unroll(a, b)
    return ContractivityProfile(
        a=frozen_array(a),
        b=frozen_array(b),
        cert_prefix=unrolled.prefix,
        method=method,
        injection=injection,
        max_recursion_deviation=unrolled.max_deviation,
    )


def profile_gd(
    traj: CoupledTrajectory,
    X_S: np.ndarray,
    eta: float,
    stream: SeededStream,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
    injection: InjectionMode = InjectionMode.RESIDUAL,
    pair: Optional[NeighborPair] = None,
) -> ContractivityProfile:
    """
    Exact GD profile: a_t = ||I - (eta/n) X_S^T X_S||_op, b_t = ||Δ_{t+1} - J Δ_t||.

    Args:
        traj: GD trajectory on the base dataset S of the pair
        X_S: Design of S
        eta: Step size the trajectory used
        stream: Power-iteration stream
        iters: Power-iteration cap
        tol: Power-iteration relative tolerance
        injection: residual (exact mismatch) or gradient_bound (per-sample bound)
        pair: The neighbor pair, needed for gradient_bound

    Returns:
        The contractivity profile with its certificate prefixes
    """
    _check_trajectory(traj, X_S, OptimizerKind.GD)
    n = X_S.shape[0]
    T = traj.steps
    a = np.full(T, propagation_factor(X_S, eta, stream, iters, tol))
    if injection == InjectionMode.RESIDUAL:
        delta = traj.w - traj.w_prime
        jacobian_delta = delta[:-1] - (eta / n) * ((delta[:-1] @ X_S.T) @ X_S)
        b = np.linalg.norm(delta[1:] - jacobian_delta, axis=1)
    else:
        b = np.array([_gradient_bound(pair, traj.w_prime[t], eta / n) for t in range(T)])
    return _profile(a, b, ProfileMethod.GD_EXACT, injection)


def batch_key(batch: np.ndarray) -> str:
    """Content hash of a minibatch, independent of index order."""
    return hashlib.sha256(np.sort(np.asarray(batch, dtype="<i8")).tobytes()).hexdigest()


def profile_sgd(
    traj: CoupledTrajectory,
    X_S: np.ndarray,
    eta: float,
    stream: SeededStream,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
    injection: InjectionMode = InjectionMode.RESIDUAL,
    pair: Optional[NeighborPair] = None,
) -> ContractivityProfile:
    """
    SGD Jacobian-proxy profile: a_t = ||I - (eta/B) X_B^T X_B||_op for the shared
    batch of step t, b_t = ||Δ_{t+1} - J_t Δ_t|| with the base-dataset Jacobian.
    """
    _check_trajectory(traj, X_S, OptimizerKind.SGD)
    if traj.minibatch_indices is None or len(traj.minibatch_indices) < traj.steps:
        raise InvalidInputError("SGD profile needs the shared minibatch log")

    cache: Dict[str, float] = {}
    T = traj.steps
    a = np.empty(T)
    b = np.empty(T)
    for t in range(T):
        batch = np.asarray(traj.minibatch_indices[t])
        X_B = X_S[batch]
        m = batch.shape[0]
        key = batch_key(batch)
        if key not in cache:
            cache[key] = propagation_factor(X_B, eta, stream, iters, tol)
        a[t] = cache[key]
        if injection == InjectionMode.RESIDUAL:
            delta_t = traj.w[t] - traj.w_prime[t]
            delta_next = traj.w[t + 1] - traj.w_prime[t + 1]
            jacobian_delta = delta_t - (eta / m) * (X_B.T @ (X_B @ delta_t))
            b[t] = np.linalg.norm(delta_next - jacobian_delta)
        elif np.any(batch == traj.replaced_index):
            b[t] = _gradient_bound(pair, traj.w_prime[t], eta / m)
        else:
            b[t] = 0.0
    logger.debug(f"SGD profile used {len(cache)} distinct batches over {T} steps")
    return _profile(a, b, ProfileMethod.SGD_JACOBIAN_PROXY, injection)


def profile_adam(traj: CoupledTrajectory) -> ContractivityProfile:
    """a_t = 1 and b_t = ||Δ_{t+1} - Δ_t||; the one-step bound is the triangle inequality."""
    if traj.optimizer != OptimizerKind.ADAM:
        raise InvalidInputError(f"expected an adam trajectory, got {traj.optimizer.value}")
    delta = traj.w - traj.w_prime
    b = np.linalg.norm(np.diff(delta, axis=0), axis=1)
    return _profile(np.ones(traj.steps), b, ProfileMethod.ADAM_IDENTITY, InjectionMode.RESIDUAL)


@dataclass(frozen=True)
class ProfileRequest:
    traj: CoupledTrajectory
    pair: NeighborPair
    stream: SeededStream
    iters: int = DEFAULT_POWER_ITERS
    tol: float = DEFAULT_POWER_TOL
    injection: InjectionMode = InjectionMode.RESIDUAL


class ProfileSelector(StrategySelector[ProfileRequest, ContractivityProfile]):
    """Maps a trajectory's optimizer to the profile construction that is sound for it."""

    def __init__(self):
        super().__init__()
        self.register_strategy(
            Strategy(
                "gd_exact",
                "Exact GD propagation factor and residual injection",
                lambda r: r.traj.optimizer == OptimizerKind.GD,
                lambda r: profile_gd(r.traj, r.pair.base.X, r.traj.eta, r.stream, r.iters, r.tol, r.injection, r.pair),
            )
        )
        self.register_strategy(
            Strategy(
                "sgd_jacobian_proxy",
                "Per-batch propagation factor with the shared minibatch Jacobian",
                lambda r: r.traj.optimizer == OptimizerKind.SGD,
                lambda r: profile_sgd(r.traj, r.pair.base.X, r.traj.eta, r.stream, r.iters, r.tol, r.injection, r.pair),
            )
        )
        self.register_strategy(
            Strategy(
                "adam_identity",
                "Unit propagation factor with all nonlinearity in b_t",
                lambda r: r.traj.optimizer == OptimizerKind.ADAM,
                lambda r: profile_adam(r.traj),
            )
        )

    def extract(self, request: ProfileRequest) -> ContractivityProfile:
        profile = self.execute_strategy(request)
        if profile is None:
            raise InvalidInputError(f"no profile construction for optimizer {request.traj.optimizer}")
        return profile


def check_unrolling_bound(
    traj: CoupledTrajectory,
    profile: ContractivityProfile,
    safety_factor: float = SAFETY_FACTOR,
    raise_on_violation: bool = True,
) -> BoundReport:
    """
    Verify ||Δw_t|| <= Cert_t at every logged step.

    The bound is evaluated on prefixes unrolled with a_t * safety_factor so that
    power-iteration error in a_t cannot produce a false violation. The one-step
    inequality ||Δ_{t+1}|| <= a_t ||Δ_t|| + b_t is checked alongside.

    Raises:
        InvariantViolationError: On the first violating step, when raise_on_violation is set
    """
    delta = np.asarray(traj.delta_norm)
    prefix = np.asarray(profile.cert_prefix)
    if delta.shape != prefix.shape or profile.a.shape[0] != delta.shape[0] - 1:
        raise InvalidInputError(f"trajectory has {delta.shape[0]} iterates, profile has {prefix.shape[0]} prefixes")

    guarded_a = profile.a * safety_factor
    guarded = unroll(guarded_a, profile.b).prefix
    bound = guarded * (1.0 + BOUND_RTOL) + BOUND_ATOL
    violations = np.flatnonzero(delta > bound)

    one_step_bound = (guarded_a * delta[:-1] + profile.b) * (1.0 + BOUND_RTOL) + BOUND_ATOL
    one_step_failures = np.flatnonzero(delta[1:] > one_step_bound) + 1

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prefix > 0, delta / prefix, np.where(delta > 0, np.inf, 0.0))
    worst_step = int(np.argmax(ratios))
    report = BoundReport(
        ok=violations.size == 0 and one_step_failures.size == 0,
        max_ratio=float(ratios[worst_step]),
        worst_step=worst_step,
        safety_factor=safety_factor,
        one_step_ok=one_step_failures.size == 0,
        max_recursion_deviation=profile.max_recursion_deviation,
        violations=tuple(int(t) for t in violations),
    )
    if not report.ok and raise_on_violation:
        if violations.size:
            t = int(violations[0])
            raise InvariantViolationError("unrolling bound violated", step=t, observed=float(delta[t]), bound=float(bound[t]))
        t = int(one_step_failures[0])
        raise InvariantViolationError(
            "one-step bound violated", step=t, observed=float(delta[t]), bound=float(one_step_bound[t - 1])
        )
    return report


def summarize_certificates(
    outcomes_by_neighbor: Sequence[Sequence[NeighborOutcome]], L_d: float = 1.0
) -> CertificateReport:
    """
    Dataset-level certificate: seed-average per neighbor, then the max over neighbors.

    Diverged runs are counted and left out of the averages.
    """
    if not outcomes_by_neighbor:
        raise InvalidInputError("at least one neighbor is required")
    means = []
    diverged = 0
    for outcomes in outcomes_by_neighbor:
        kept = [o for o in outcomes if not o.diverged]
        diverged += len(outcomes) - len(kept)
        if kept:
            means.append(
                (
                    float(np.mean([o.final_cert for o in kept])),
                    float(np.mean([o.delta_T for o in kept])),
                    float(np.mean([o.probe_disc_T for o in kept])),
                )
            )
        else:
            means.append((float("nan"), float("nan"), float("nan")))

    certs = np.array([m[0] for m in means])
    if np.all(np.isnan(certs)):
        worst = 0
    else:
        worst = int(np.nanargmax(certs))
    cert_T, delta_T, probe_T = means[worst]
    if diverged:
        logger.warning(f"{diverged} diverged runs left out of the dataset certificate")
    return CertificateReport(
        cert_T=cert_T,
        beta_T=L_d * cert_T,
        L_d=L_d,
        delta_T=delta_T,
        probe_disc_T=probe_T,
        neighbor_count=len(outcomes_by_neighbor),
        dataset_cert=cert_T,
        neighbor_certs=tuple(float(c) for c in certs),
        worst_neighbor=worst,
        diverged_count=diverged,
    )


def dataset_certificate(
    base: Dataset,
    probes: ProbeSet,
    opt: OptimizerSpec,
    T: int,
    K_neighbors: int,
    seeds: Sequence[int],
    selection: SelectionMode = SelectionMode.RANDOM_INDEX,
    neighbor_stream: Optional[SeededStream] = None,
    L_d: float = 1.0,
    init_scale: float = 0.0,
    injection: InjectionMode = InjectionMode.RESIDUAL,
    label_mode: LabelMode = LabelMode.MARGINAL,
    replacement: ReplacementKind = ReplacementKind.EMPIRICAL,
    jitter_scale: float = DEFAULT_JITTER_SCALE,
    iters: int = DEFAULT_POWER_ITERS,
    tol: float = DEFAULT_POWER_TOL,
) -> CertificateReport:
    """
    Neighbor-worst-case, seed-averaged terminal certificate of one dataset.

    Neighbor k is built from neighbor_stream.derive(k) (by default the NEIGHBOR
    stream of the dataset's seed); seed u drives the initialization, minibatches
    and power iteration of its runs.
    """
    if K_neighbors < 1:
        raise InvalidInputError(f"K_neighbors must be at least 1, got {K_neighbors}")
    if not seeds:
        raise InvalidInputError("seeds must be nonempty")
    neighbor_stream = neighbor_stream or base.source.with_id(StreamId.NEIGHBOR)
    selector = ProfileSelector()

    outcomes_by_neighbor = []
    for k in range(K_neighbors):
        pair = make_neighbor(base, selection, neighbor_stream.derive(k), label_mode, replacement, jitter_scale)
        outcomes = []
        for seed in seeds:
            traj = run_coupled(pair, probes, opt, T, SeededStream(seed, StreamId.INIT), init_scale)
            request = ProfileRequest(traj, pair, SeededStream(seed, StreamId.POWER), iters, tol, injection)
            profile = selector.extract(request)
            check_unrolling_bound(traj, profile)
            outcomes.append(
                NeighborOutcome(
                    neighbor=k,
                    final_cert=profile.final_cert,
                    delta_T=float(traj.delta_norm[-1]),
                    probe_disc_T=float(traj.probe_disc[-1]),
                    diverged=traj.diverged,
                )
            )
        outcomes_by_neighbor.append(outcomes)
    return summarize_certificates(outcomes_by_neighbor, L_d)


__all__ = [
    "ProfileRequest",
    "ProfileSelector",
    "batch_key",
    "check_unrolling_bound",
    "dataset_certificate",
    "profile_adam",
    "profile_gd",
    "profile_sgd",
    "propagation_factor",
    "sharpness",
    "summarize_certificates",
    "unroll",
]
