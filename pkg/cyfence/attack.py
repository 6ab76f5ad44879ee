"""Tampering of the non-secure side of the loop.

An attack rewrites what the primary controller works with: its copy of the
gains, the setpoint it computes the error against, the output wire towards
the actuator, or its execution time. Attacks never see the secure store.
"""

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import pydantic

from .controller import PidGains


class AttackKind(str, enum.Enum):
    """What an attack tampers with."""

    PARAM_KP = "param_kp"
    PARAM_KI = "param_ki"
    PARAM_KD = "param_kd"
    SETPOINT = "setpoint"
    OUTPUT_OVERRIDE = "output_override"
    DEADLINE_DELAY = "deadline_delay"


GAIN_FIELDS = {
    AttackKind.PARAM_KP: "Kp",
    AttackKind.PARAM_KI: "Ki",
    AttackKind.PARAM_KD: "Kd",
}


class AttackSpec(pydantic.BaseModel):
    """One tampering action and its activity window.

    ``value`` is the new gain, the new setpoint, the forced output as a
    fraction of the output limit, or the injected delay in seconds.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    kind: AttackKind
    value: float
    t_start: float = pydantic.Field(default=0.0, ge=0)
    t_end: Optional[float] = None

    @pydantic.model_validator(mode="after")
    def _check_window(self) -> "AttackSpec":
        if self.t_end is not None and self.t_end <= self.t_start:
            raise ValueError("t_end must be greater than t_start.")

        if self.kind is AttackKind.DEADLINE_DELAY and self.value < 0:
            raise ValueError("Injected delay must be non-negative.")

        return self

    def active(self, t: float) -> bool:
        """Whether the attack is in effect at time ``t``."""

        return self.t_start <= t < (math.inf if self.t_end is None else self.t_end)


@dataclass(frozen=True)
class LoopView:
    """What the non-secure controller works with during one iteration.

    :param gains: Working copy of the gains, setpoint included.
    :param output_override: Forced controller output, or None.
    :param extra_delay: Execution time added to the iteration, in seconds.
    """

    gains: PidGains
    output_override: Optional[float] = None
    extra_delay: float = 0.0


def apply(spec: AttackSpec, view: LoopView, t: float) -> LoopView:
    """Tamper with a loop view.

    :param spec: The attack.
    :param view: The view to tamper with; it is not modified.
    :param t: Iteration time in seconds.

    :return: The tampered view, or ``view`` itself outside the attack window.
    """

    if not spec.active(t):
        return view

    if spec.kind in GAIN_FIELDS:
        return replace(view, gains=view.gains.model_copy(update={GAIN_FIELDS[spec.kind]: spec.value}))

    if spec.kind is AttackKind.SETPOINT:
        return replace(view, gains=view.gains.model_copy(update={"setpoint": spec.value}))

    if spec.kind is AttackKind.OUTPUT_OVERRIDE:
        return replace(view, output_override=spec.value * view.gains.u_max)

    return replace(view, extra_delay=view.extra_delay + spec.value)


def apply_all(specs: Iterable[AttackSpec], view: LoopView, t: float) -> LoopView:
    """Apply several attacks in order."""

    for spec in specs:
        view = apply(spec, view, t)

    return view
