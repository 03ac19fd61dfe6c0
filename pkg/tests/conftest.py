import numpy as np
import pytest

from TrajCert.application.models.model_configs import (
    OptimizerKind,
    OptimizerSpec,
    SelectionMode,
    SpectrumKind,
    SpectrumSpec,
)
from TrajCert.application.services.datagen_service import make_dataset, make_neighbor, make_probe_and_test
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId
from diagnostics.config.config import load_suite_config


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("TCERT_SEED", "TCERT_WORKERS", "TCERT_PROFILE", "LANGFUSE_PUBLIC_KEY", "LANGFUSE_SECRET_KEY", "LANGFUSE_HOST"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def small_spec():
    return SpectrumSpec(kind=SpectrumKind.POWER_DECAY, p=24, alpha=1.0, variance_scale=1.0 / 24)


@pytest.fixture
def small_dataset(small_spec):
    return make_dataset(small_spec, 16, 0.25, SeededStream(3, StreamId.DATA))


@pytest.fixture
def small_probes(small_spec, small_dataset):
    return make_probe_and_test(small_spec, small_dataset.w_star, 0.25, 20, 40, SeededStream(3, StreamId.PROBE))


@pytest.fixture
def small_pair(small_dataset):
    return make_neighbor(small_dataset, SelectionMode.RANDOM_INDEX, SeededStream(3, StreamId.NEIGHBOR).derive(0))


@pytest.fixture
def optimizer_specs():
    return {
        OptimizerKind.GD: OptimizerSpec(kind=OptimizerKind.GD, eta=0.2),
        OptimizerKind.SGD: OptimizerSpec(kind=OptimizerKind.SGD, eta=0.2, batch_size=4),
        OptimizerKind.ADAM: OptimizerSpec(kind=OptimizerKind.ADAM, eta=0.05),
    }


@pytest.fixture
def smoke_config():
    return load_suite_config(None, profile="smoke", environ={})


@pytest.fixture
def smoke_condition(smoke_config):
    return smoke_config.base_condition().model_copy(update={"seeds": (0,)})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
