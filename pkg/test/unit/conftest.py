from pathlib import Path

import pytest

from cyfence import secure, sim
from cyfence.attack import AttackKind, AttackSpec
from cyfence.controller import PidGains
from cyfence.plant import PlantParams

SCENARIOS_DIR = Path(__file__).parents[2] / "scenarios"


@pytest.fixture(scope="session")
def scenarios_dir():
    return SCENARIOS_DIR


@pytest.fixture(scope="session")
def default_plant():
    return PlantParams()


@pytest.fixture(scope="session")
def nominal_gains():
    return PidGains()


@pytest.fixture(scope="session")
def base_config():
    return sim.SimConfig()


@pytest.fixture(scope="session")
def nominal_result(base_config):
    return sim.run_braking(base_config)


@pytest.fixture(scope="session")
def nominal_unmonitored_result(base_config):
    return sim.run_braking(base_config.with_monitor(False))


@pytest.fixture(scope="session")
def setpoint09_config(base_config):
    return base_config.with_attacks(AttackSpec(kind=AttackKind.SETPOINT, value=0.9))


@pytest.fixture
def test_envelope():
    return secure.Envelope(setpoint=0.12, omega_n=50.0, xi=0.6)


@pytest.fixture
def test_store(nominal_gains, test_envelope):
    """A store with the same envelope in every speed bin."""

    envelopes = {v: test_envelope for v in range(secure.SPEED_BIN_MIN, secure.SPEED_BIN_MAX + 1)}
    luts = {v: secure.lut_build(test_envelope, 1e-3, 5.0) for v in envelopes}

    return secure.CdalStore(nominal_gains, envelopes, luts, 2000.0, 0.3)


@pytest.fixture
def test_validator(test_store):
    return secure.Validator(test_store, secure.MonitorConfig())
