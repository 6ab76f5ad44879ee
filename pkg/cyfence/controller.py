"""Discrete PID wheel-slip controller with filtered derivative.

The continuous controller is ``Kp + Ki / s + Kd s / (Tf s + 1)``; every term
is realized with the bilinear (Tustin) rule, like the blocks of :mod:`cyfence.lti`.
"""

import math
from dataclasses import dataclass

import pydantic

from . import lti
from .exceptions import CorruptedFeedbackError


# pylint: disable=invalid-name
class PidGains(pydantic.BaseModel):
    """Controller gains, setpoint and brake-torque limits.

    The defaults are the nominal tuning of the ABS loop. ``u_min`` and
    ``u_max`` are in N m; see :func:`in_command_units` for the controller side.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    Kp: float = 3151.0
    Ki: float = 40400.0
    Kd: float = 30.5
    Tf: float = pydantic.Field(default=0.1, gt=0, description="Derivative filter time constant (s).")
    setpoint: float = pydantic.Field(default=0.12, gt=0, lt=1, description="Target wheel slip.")
    u_min: float = pydantic.Field(default=-4000.0, description="Lower brake-torque limit (N m).")
    u_max: float = pydantic.Field(default=4000.0, description="Upper brake-torque limit (N m).")

    @pydantic.model_validator(mode="after")
    def _check_limits(self) -> "PidGains":
        if self.u_max <= self.u_min:
            raise ValueError("u_max must be greater than u_min.")

        return self


# pylint: enable=invalid-name


def in_command_units(gains: PidGains, gain_scale: float) -> PidGains:
    """The gains with their torque limits expressed as controller output.

    The brake torque is ``gain_scale`` times the controller output.
    """

    if not gain_scale > 0:
        raise ValueError("Gain scale must be positive.", gain_scale)

    return gains.model_copy(update={"u_min": gains.u_min / gain_scale, "u_max": gains.u_max / gain_scale})


@dataclass
class PidState:
    """Mutable state of one controller instance.

    ``integral`` holds the integral term already multiplied by ``Ki``, so a
    gain change only affects what is accumulated afterwards. ``derivative``
    is the filtered derivative of the error, before ``Kd``.
    """

    integral: float = 0.0
    derivative: float = 0.0
    prev_error: float = 0.0
    started: bool = False
    saturated: bool = False


def pid_step(state: PidState, gains: PidGains, error: float, dt: float) -> float:
    """Advance the controller by one sample.

    The integral is a trapezoid over the samples seen so far, so the first
    call only records the error. The derivative filter starts from rest with
    a zero previous error. While the output is clamped, integration is
    skipped whenever it would push the output further past the limit.

    :param state: Controller state, mutated in place.
    :param gains: Gains in effect for this sample.
    :param error: Setpoint minus measured slip.
    :param dt: Sample period in seconds.

    :return: The clamped controller output.

    :raises CorruptedFeedbackError: If the error is not finite.
    """

    if not math.isfinite(error):
        raise CorruptedFeedbackError("Non-finite controller input.", error)

    if not dt > 0:
        raise ValueError("Sample period must be positive.", dt)

    increment = gains.Ki * dt / 2 * (error + state.prev_error) if state.started else 0.0

    c = 2 / dt
    derivative = ((gains.Tf * c - 1) * state.derivative + c * (error - state.prev_error)) / (gains.Tf * c + 1)

    partial = gains.Kp * error + gains.Kd * derivative
    unclamped = partial + state.integral + increment

    state.saturated = unclamped > gains.u_max or unclamped < gains.u_min
    winding_up = (unclamped > gains.u_max and increment > 0) or (unclamped < gains.u_min and increment < 0)

    if not winding_up:
        state.integral += increment

    state.derivative = derivative
    state.prev_error = error
    state.started = True

    return min(max(partial + state.integral, gains.u_min), gains.u_max)


def reset(state: PidState, integral: float = 0.0) -> PidState:
    """Bring a controller back to rest.

    :param state: The state to reset, in place.
    :param integral: Initial value of the integral term, for bumpless transfer.

    :return: The same state object.
    """

    state.integral = integral
    state.derivative = 0.0
    state.prev_error = 0.0
    state.started = False
    state.saturated = False

    return state


def pid_tf(gains: PidGains) -> lti.RationalTf:
    """Continuous transfer function of the controller.

    ``(Ki + (Kp + Ki Tf) s + (Kp Tf + Kd) s^2) / (s + Tf s^2)``
    """

    return lti.RationalTf(
        (gains.Ki, gains.Kp + gains.Ki * gains.Tf, gains.Kp * gains.Tf + gains.Kd),
        (0.0, 1.0, gains.Tf),
    )
