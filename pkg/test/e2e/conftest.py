import sys
from os import unlink
from pathlib import Path
from tempfile import NamedTemporaryFile

import pytest

import cyfence

SCENARIOS_DIR = Path(__file__).parents[2] / "scenarios"


@pytest.fixture
def tmp_output_file():
    tmpfile = NamedTemporaryFile(delete=False, suffix=".csv")
    tmpfile.close()

    yield tmpfile.name

    unlink(tmpfile.name)


@pytest.fixture
def cyfence_invoke_cmdline():
    return (sys.executable, f"-m{cyfence.__package__}")


@pytest.fixture(scope="session")
def nominal_scenario():
    return str(SCENARIOS_DIR / "nominal.toml")


@pytest.fixture(scope="session")
def setpoint09_scenario():
    return str(SCENARIOS_DIR / "setpoint09.toml")


@pytest.fixture(scope="session")
def sweep_setpoint_scenario():
    return str(SCENARIOS_DIR / "sweep-setpoint.toml")


@pytest.fixture
def unstable_scenario(tmp_path):
    scenario_file = tmp_path / "unstable.toml"
    scenario_file.write_text("[gains]\nKp = 1000000.0\n", encoding="utf-8")

    return str(scenario_file)
