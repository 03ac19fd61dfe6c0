from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrajCert.application.models.domain import NeighborOutcome
from TrajCert.application.models.errors import InvalidInputError, InvariantViolationError
from TrajCert.application.models.model_configs import (
    InjectionMode,
    OptimizerKind,
    OptimizerSpec,
    ProfileMethod,
    SelectionMode,
    SpectrumKind,
    SpectrumSpec,
)
from TrajCert.application.services.certificate_service import (
    ProfileRequest,
    ProfileSelector,
    batch_key,
    check_unrolling_bound,
    dataset_certificate,
    profile_gd,
    propagation_factor,
    summarize_certificates,
    unroll,
)
from TrajCert.application.services.datagen_service import make_dataset, make_neighbor, make_probe_and_test
from TrajCert.application.services.dynamics_service import run_coupled
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId


def _profile_for(pair, probes, opt, T=20, injection=InjectionMode.RESIDUAL):
    traj = run_coupled(pair, probes, opt, T, SeededStream(3, StreamId.INIT))
    request = ProfileRequest(traj, pair, SeededStream(3, StreamId.POWER), injection=injection)
    return traj, ProfileSelector().extract(request)


def test_unroll_small_recursion():
    unrolled = unroll([2.0, 3.0], [1.0, 1.0])
    assert unrolled.prefix.tolist() == [0.0, 1.0, 4.0]
    assert unrolled.max_deviation == 0.0


def test_unroll_matches_sum_of_products(rng):
    a = rng.uniform(0.5, 1.5, 40)
    b = rng.uniform(0.0, 0.1, 40)
    unrolled = unroll(a, b)
    T = 40
    direct = sum(np.prod(a[s + 1 : T]) * b[s] for s in range(T))
    assert unrolled.prefix[-1] == pytest.approx(direct, rel=1e-12)
    assert unrolled.max_deviation < 1e-12


def test_unroll_rejects_invalid_profiles():
    with pytest.raises(InvalidInputError):
        unroll([1.0, -0.5], [0.0, 0.0])
    with pytest.raises(InvalidInputError):
        unroll([1.0], [0.0, 1.0])
    with pytest.raises(InvalidInputError):
        unroll([np.nan], [1.0])


def test_gd_propagation_factor_matches_dense_spectrum(rng):
    X = rng.standard_normal((24, 8)) / np.sqrt(8)
    eta = 0.3
    eigenvalues = np.linalg.eigvalsh(X.T @ X / 24)
    expected = max(abs(1 - eta * eigenvalues[0]), abs(1 - eta * eigenvalues[-1]))
    estimate = propagation_factor(X, eta, SeededStream(0, StreamId.POWER), iters=2000, tol=0.0)
    assert estimate == pytest.approx(expected, rel=1e-6)


def test_rank_deficient_propagation_factor_is_at_least_one(small_dataset):
    assert propagation_factor(small_dataset.X, 0.2, SeededStream(0, StreamId.POWER)) >= 1.0


def test_gd_injection_matches_gradient_oracle(small_pair, small_probes):
    eta = 0.2
    traj, profile = _profile_for(small_pair, small_probes, OptimizerSpec(kind=OptimizerKind.GD, eta=eta))
    i = small_pair.replaced_index
    x, y = small_pair.base.X[i], small_pair.base.y[i]
    x_new, y_new = small_pair.neighbor.X[i], small_pair.neighbor.y[i]
    n = small_pair.base.n
    oracle = [
        eta / n * np.linalg.norm(x * (x @ w) - x * y - x_new * (x_new @ w) + x_new * y_new) for w in traj.w_prime[:-1]
    ]
    assert_allclose(profile.b, oracle, rtol=1e-6, atol=1e-12)


def test_gradient_bound_injection_dominates_residual(small_pair, small_probes):
    opt = OptimizerSpec(kind=OptimizerKind.GD, eta=0.2)
    _, residual = _profile_for(small_pair, small_probes, opt)
    traj, bound = _profile_for(small_pair, small_probes, opt, injection=InjectionMode.GRADIENT_BOUND)
    assert np.all(bound.b >= residual.b * (1 - 1e-9))
    assert check_unrolling_bound(traj, bound).ok


@pytest.mark.parametrize("kind", list(OptimizerKind))
def test_unrolling_bound_holds(small_pair, small_probes, optimizer_specs, kind):
    traj, profile = _profile_for(small_pair, small_probes, optimizer_specs[kind])
    report = check_unrolling_bound(traj, profile)
    assert report.ok
    assert report.one_step_ok
    assert report.max_ratio <= 1.0 + 1e-6
    assert profile.cert_prefix[0] == 0.0
    assert np.all(np.diff(profile.cert_prefix) >= 0.0)


def test_profile_method_follows_optimizer(small_pair, small_probes, optimizer_specs):
    methods = {
        OptimizerKind.GD: ProfileMethod.GD_EXACT,
        OptimizerKind.SGD: ProfileMethod.SGD_JACOBIAN_PROXY,
        OptimizerKind.ADAM: ProfileMethod.ADAM_IDENTITY,
    }
    for kind, method in methods.items():
        _, profile = _profile_for(small_pair, small_probes, optimizer_specs[kind], T=5)
        assert profile.method == method
    _, adam = _profile_for(small_pair, small_probes, optimizer_specs[OptimizerKind.ADAM], T=5)
    assert np.all(adam.a == 1.0)


@pytest.mark.parametrize("kind", list(OptimizerKind))
def test_identical_datasets_give_zero_certificate(small_dataset, small_probes, optimizer_specs, kind):
    pair = make_neighbor(small_dataset, SelectionMode.IDENTITY, SeededStream(3, StreamId.NEIGHBOR))
    _, profile = _profile_for(pair, small_probes, optimizer_specs[kind])
    assert profile.final_cert == 0.0
    assert np.all(profile.b == 0.0)


def test_zeroed_injection_is_caught(small_pair, small_probes):
    traj, profile = _profile_for(small_pair, small_probes, OptimizerSpec(kind=OptimizerKind.GD, eta=0.2))
    zero_b = np.zeros_like(profile.b)
    broken = replace(profile, b=zero_b, cert_prefix=unroll(profile.a, zero_b).prefix)
    with pytest.raises(InvariantViolationError) as excinfo:
        check_unrolling_bound(traj, broken)
    assert excinfo.value.step == 1
    report = check_unrolling_bound(traj, broken, raise_on_violation=False)
    assert not report.ok
    assert report.violations[0] == 1


def test_gd_profile_rejects_other_trajectories(small_pair, small_probes, optimizer_specs):
    traj = run_coupled(small_pair, small_probes, optimizer_specs[OptimizerKind.ADAM], 5, SeededStream(3, StreamId.INIT))
    with pytest.raises(InvalidInputError):
        profile_gd(traj, small_pair.base.X, 0.05, SeededStream(3, StreamId.POWER))


def test_batch_key_ignores_order():
    assert batch_key(np.array([3, 1, 2])) == batch_key(np.array([1, 2, 3]))
    assert batch_key(np.array([1, 2])) != batch_key(np.array([1, 3]))


def test_summarize_takes_worst_neighbor_and_skips_diverged():
    outcomes = [
        [NeighborOutcome(0, 1.0, 0.5, 0.1, False), NeighborOutcome(0, 3.0, 0.7, 0.3, False)],
        [NeighborOutcome(1, 4.0, 0.9, 0.4, False), NeighborOutcome(1, 100.0, 9.0, 9.0, True)],
    ]
    report = summarize_certificates(outcomes, L_d=2.0)
    assert report.neighbor_certs == (2.0, 4.0)
    assert report.worst_neighbor == 1
    assert report.cert_T == 4.0
    assert report.beta_T == 8.0
    assert report.delta_T == 0.9
    assert report.diverged_count == 1
    assert report.flagged


def test_summarize_needs_a_neighbor():
    with pytest.raises(InvalidInputError):
        summarize_certificates([])


def test_dataset_certificate_covers_every_neighbor():
    spec = SpectrumSpec(kind=SpectrumKind.POWER_DECAY, p=16, variance_scale=1.0 / 16)
    base = make_dataset(spec, 12, 0.25, SeededStream(4, StreamId.DATA))
    probes = make_probe_and_test(spec, base.w_star, 0.25, 8, 8, SeededStream(4, StreamId.PROBE))
    report = dataset_certificate(base, probes, OptimizerSpec(kind=OptimizerKind.GD, eta=0.2), 10, 3, seeds=(0, 1))
    assert report.neighbor_count == 3
    assert len(report.neighbor_certs) == 3
    assert report.dataset_cert == max(report.neighbor_certs)
    assert report.delta_T <= report.dataset_cert * (1 + 1e-6)
