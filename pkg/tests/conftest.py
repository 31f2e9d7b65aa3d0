import pytest

from efkesim.config import ActuatorConfig, Environment
from efkesim.waveform import HvWaveform, preset


@pytest.fixture
def cfg() -> ActuatorConfig:
    return ActuatorConfig()


@pytest.fixture
def frictionless(cfg) -> ActuatorConfig:
    return cfg.replaced(mu_static=0.0, mu_dynamic=0.0)


@pytest.fixture
def air() -> Environment:
    return Environment()


@pytest.fixture
def w2080() -> HvWaveform:
    return preset("5kv-20-80")
