"""Scenario file management.

This module contains all the code to load, store and validate
scenario files: TOML documents whose sections mirror the
configuration models of the library.
"""

from typing import Any, Literal, Optional, TextIO, Union

import pydantic
import toml

from .attack import AttackKind, AttackSpec
from .controller import PidGains
from .plant import PlantParams
from .secure import MonitorConfig
from .sim import SimConfig

SweepAxis = Literal["Kp", "Ki", "Kd", "setpoint", "output"]

_SIM_DEFAULTS = SimConfig.model_fields


class SimSection(pydantic.BaseModel):
    """The ``[sim]`` section."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    dt: float = _SIM_DEFAULTS["dt"].default
    v0: float = _SIM_DEFAULTS["v0"].default
    v_stop: float = _SIM_DEFAULTS["v_stop"].default
    max_t: float = _SIM_DEFAULTS["max_t"].default
    multi_attack: bool = False


class SweepSpec(pydantic.BaseModel):
    """The optional ``[sweep]`` section of sweep presets."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    axis: SweepAxis
    values: tuple[float, ...]


class Scenario(pydantic.BaseModel):
    """A scenario document."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    plant: PlantParams = pydantic.Field(default_factory=PlantParams)
    gains: PidGains = pydantic.Field(default_factory=PidGains)
    sim: SimSection = pydantic.Field(default_factory=SimSection)
    attack: Union[AttackSpec, list[AttackSpec], None] = None
    monitor: MonitorConfig = pydantic.Field(default_factory=MonitorConfig)
    sweep: Optional[SweepSpec] = None

    @property
    def attacks(self) -> tuple[AttackSpec, ...]:
        """Configured attacks, in document order."""

        if self.attack is None:
            return ()

        return (self.attack,) if isinstance(self.attack, AttackSpec) else tuple(self.attack)

    def to_config(self) -> SimConfig:
        """Build the simulation configuration."""

        return SimConfig(
            **self.sim.model_dump(), plant=self.plant, gains=self.gains, monitor=self.monitor, attacks=self.attacks
        )


def create_sample_scenario() -> Scenario:
    """Create an example scenario.

    :return: A setpoint-tampering scenario with every section populated,
        to simplify manual scenario creation.
    """

    return Scenario(attack=AttackSpec(kind=AttackKind.SETPOINT, value=0.9))


def scenario_document(scenario: Scenario) -> dict[str, Any]:
    """The TOML-ready representation of a scenario."""

    return scenario.model_dump(mode="json", exclude_none=True)


def store_scenario(out_file: TextIO, scenario: Scenario):
    """Store a scenario to file.

    :param out_file: The output file.
    :param scenario: The scenario to store.
    """

    toml.dump(scenario_document(scenario), out_file)


def _describe_validation_error(exc: pydantic.ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or '<document>'}: {error['msg']}" for error in exc.errors()
    )


def validate_scenario(maybe_scenario: Any) -> Scenario:
    """Validate a scenario document.

    This function will raise a `ValueError` naming the offending keys if the
    provided object is not a valid scenario, or if it does not describe a
    valid simulation.

    :param maybe_scenario: The parsed document.

    :return: The validated scenario.
    """

    try:
        scenario = Scenario.model_validate(maybe_scenario)
        scenario.to_config()
    except pydantic.ValidationError as exc:
        raise ValueError(f"Invalid scenario: {_describe_validation_error(exc)}", maybe_scenario) from exc

    return scenario


def load_scenario(scenario_file: TextIO) -> Scenario:
    """Load a scenario file.

    This function will raise an `IOError` if the provided file
    is not a valid scenario file.

    :param scenario_file: The scenario file.

    :return: The loaded scenario.
    """

    try:
        document = toml.load(scenario_file)
    except toml.TomlDecodeError as exc:
        raise IOError(f"Invalid scenario file. Line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    try:
        return validate_scenario(document)
    except ValueError as exc:
        raise IOError(f"Invalid scenario file. {exc.args[0]}") from exc
