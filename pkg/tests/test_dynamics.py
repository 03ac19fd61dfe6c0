import numpy as np
import pytest
from numpy.testing import assert_allclose

from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import (
    OptimizerKind,
    OptimizerSpec,
    SelectionMode,
    SpectrumKind,
    SpectrumSpec,
)
from TrajCert.application.services.datagen_service import make_dataset, make_neighbor, make_probe_and_test
from TrajCert.application.services.dynamics_service import init_weights, minibatch_schedule, mse, run_coupled
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId
from TrajCert.infrastructure.optim.factory import OptimizerFactory


def test_zero_initialization_by_default():
    assert np.array_equal(init_weights(5, SeededStream(0, StreamId.INIT)), np.zeros(5))
    assert np.any(init_weights(5, SeededStream(0, StreamId.INIT), 0.1) != 0.0)


def test_minibatch_schedule_covers_each_epoch():
    batches = minibatch_schedule(10, 4, 6, SeededStream(0, StreamId.MINIBATCH))
    assert [len(b) for b in batches] == [4, 4, 2, 4, 4, 2]
    assert sorted(np.concatenate(batches[:3]).tolist()) == list(range(10))
    assert sorted(np.concatenate(batches[3:]).tolist()) == list(range(10))


def test_optimizer_factory_rejects_unknown_kind():
    with pytest.raises(InvalidInputError):
        OptimizerFactory.create_optimizer(OptimizerSpec.model_construct(kind="momentum", eta=0.1))


def test_gd_trajectory_shapes(small_pair, small_probes, optimizer_specs):
    traj = run_coupled(small_pair, small_probes, optimizer_specs[OptimizerKind.GD], 15, SeededStream(3, StreamId.INIT))
    assert traj.steps == 15
    assert traj.w.shape == (16, 24)
    assert traj.delta_norm[0] == 0.0
    assert traj.delta_norm[-1] > 0.0
    assert not traj.diverged
    assert traj.minibatch_indices is None
    assert traj.train_mse[-1] == pytest.approx(mse(traj.w[-1], small_pair.base.X, small_pair.base.y))


def test_training_loss_decreases_under_gd(small_pair, small_probes, optimizer_specs):
    traj = run_coupled(small_pair, small_probes, optimizer_specs[OptimizerKind.GD], 30, SeededStream(3, StreamId.INIT))
    assert np.all(np.diff(traj.train_mse) <= 1e-12)


def test_full_batch_sgd_matches_gd(small_pair, small_probes):
    n = small_pair.base.n
    gd = run_coupled(small_pair, small_probes, OptimizerSpec(kind=OptimizerKind.GD, eta=0.3), 12, SeededStream(5, StreamId.INIT))
    sgd = run_coupled(
        small_pair, small_probes, OptimizerSpec(kind=OptimizerKind.SGD, eta=0.3, batch_size=n), 12, SeededStream(5, StreamId.INIT)
    )
    assert_allclose(sgd.w, gd.w, rtol=1e-10, atol=1e-12)
    assert_allclose(sgd.w_prime, gd.w_prime, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("kind", list(OptimizerKind))
def test_identical_datasets_give_identical_runs(small_dataset, small_probes, optimizer_specs, kind):
    pair = make_neighbor(small_dataset, SelectionMode.IDENTITY, SeededStream(3, StreamId.NEIGHBOR))
    traj = run_coupled(pair, small_probes, optimizer_specs[kind], 10, SeededStream(3, StreamId.INIT), init_scale=0.1)
    assert np.all(traj.delta_norm == 0.0)
    assert np.all(traj.probe_disc == 0.0)


def test_coupled_runs_are_reproducible(small_pair, small_probes, optimizer_specs):
    opt = optimizer_specs[OptimizerKind.SGD]
    first = run_coupled(small_pair, small_probes, opt, 10, SeededStream(9, StreamId.INIT))
    second = run_coupled(small_pair, small_probes, opt, 10, SeededStream(9, StreamId.INIT))
    assert np.array_equal(first.w, second.w)
    assert all(np.array_equal(a, b) for a, b in zip(first.minibatch_indices, second.minibatch_indices))


def test_large_step_size_is_truncated_at_divergence():
    spec = SpectrumSpec(kind=SpectrumKind.FLAT, p=4)
    base = make_dataset(spec, 8, 0.1, SeededStream(0, StreamId.DATA))
    pair = make_neighbor(base, SelectionMode.RANDOM_INDEX, SeededStream(0, StreamId.NEIGHBOR))
    probes = make_probe_and_test(spec, base.w_star, 0.1, 8, 8, SeededStream(0, StreamId.PROBE))
    traj = run_coupled(pair, probes, OptimizerSpec(kind=OptimizerKind.GD, eta=10.0), 500, SeededStream(0, StreamId.INIT))
    assert traj.diverged
    assert traj.steps < 500
    assert np.all(np.isfinite(traj.w))
    assert np.all(np.isfinite(traj.train_mse))
    assert traj.delta_norm.shape[0] == traj.steps + 1


def test_run_coupled_needs_a_step(small_pair, small_probes, optimizer_specs):
    with pytest.raises(InvalidInputError):
        run_coupled(small_pair, small_probes, optimizer_specs[OptimizerKind.GD], 0, SeededStream(0, StreamId.INIT))
