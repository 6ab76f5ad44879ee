"""Fixed-step closed-loop braking simulation.

One iteration of :func:`run_braking` follows the loop of the device: the
secure side ingests the sensors, the (possibly tampered) primary controller
or its replacement computes a command, the brake actuator and the wheel
move, the validator checks the result and recovery reacts to detections.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import pydantic
from scipy import integrate

from . import attack, controller, lti, plant, secure
from .attack import AttackKind, AttackSpec
from .controller import PidGains, PidState
from .exceptions import CorruptedFeedbackError, NoCrossoverError, SimulationAborted
from .plant import PlantParams
from .secure import ControllerId, DetectionEvent, MonitorConfig, RecoveryAction

logger = logging.getLogger(__name__)

SWEEP_AXES = {
    "Kp": AttackKind.PARAM_KP,
    "Ki": AttackKind.PARAM_KI,
    "Kd": AttackKind.PARAM_KD,
    "setpoint": AttackKind.SETPOINT,
    "output": AttackKind.OUTPUT_OVERRIDE,
}


class SimConfig(pydantic.BaseModel):
    """Complete description of one braking manoeuvre."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    dt: float = pydantic.Field(default=0.005, gt=0, description="Loop period (s).")
    v0: float = pydantic.Field(default=35.0, gt=0, description="Initial vehicle speed (m/s).")
    v_stop: float = pydantic.Field(default=5.0, ge=plant.ABS_MIN_SPEED, description="ABS cut-off speed (m/s).")
    max_t: float = pydantic.Field(default=20.0, gt=0, description="Safety horizon (s).")
    multi_attack: bool = False
    plant: PlantParams = pydantic.Field(default_factory=PlantParams)
    gains: PidGains = pydantic.Field(default_factory=PidGains)
    monitor: MonitorConfig = pydantic.Field(default_factory=MonitorConfig)
    attacks: tuple[AttackSpec, ...] = ()

    @pydantic.model_validator(mode="after")
    def _check_manoeuvre(self) -> "SimConfig":
        if self.v0 <= self.v_stop:
            raise ValueError("v0 must be greater than v_stop.")

        if len(self.attacks) > 1 and not self.multi_attack:
            raise ValueError("Several attacks require multi_attack = true.")

        return self

    @property
    def attack(self) -> Optional[AttackSpec]:
        """The first configured attack, if any."""

        return self.attacks[0] if self.attacks else None

    @property
    def monitor_enabled(self) -> bool:
        """Whether the validator runs."""

        return self.monitor.enabled

    @property
    def lut_enabled(self) -> bool:
        """Whether the semantic check uses lookup tables."""

        return self.monitor.lut_enabled

    def with_attacks(self, *attacks: AttackSpec) -> "SimConfig":
        """A copy of the configuration with other attacks."""

        return SimConfig.model_validate({**self.model_dump(), "attacks": [a.model_dump() for a in attacks]})

    def with_monitor(self, enabled: bool) -> "SimConfig":
        """A copy of the configuration with the monitor switched on or off."""

        return self.model_copy(update={"monitor": self.monitor.model_copy(update={"enabled": enabled})})


@dataclass
class SimState:
    """Physical state of the braking corner."""

    t: float
    v: float
    omega: float
    slip: float = 0.0
    u: float = 0.0


@dataclass(frozen=True)
class Row:
    """One logged loop iteration."""

    t: float
    v: float
    omega: float
    slip: float
    bound_lo: float
    bound_hi: float
    u_commanded: float
    u_applied: float
    active_controller: ControllerId
    detected_kind: str
    elapsed_budget: float


@dataclass
class ScenarioResult:
    """Everything a braking run produced."""

    rows: list[Row] = field(default_factory=list)
    events: list[DetectionEvent] = field(default_factory=list)
    actions: list[RecoveryAction] = field(default_factory=list)
    deadline_misses: int = 0
    incomplete: bool = False
    attack_start: float = 0.0
    final: Optional[tuple[float, float]] = None

    @property
    def detection_time(self) -> Optional[float]:
        """See :func:`detection_time`."""

        return detection_time(self)

    @property
    def stop_distance(self) -> float:
        """See :func:`stop_distance`."""

        return stop_distance(self)


def _wheel_step(p: PlantParams, state: SimState, torque: float, dt: float) -> tuple[float, float]:
    """Explicit Euler step of the vehicle and wheel speeds.

    The wheel speed is kept in ``[0, v / r]`` so that slip stays in [0, 1].
    """

    mu, _ = plant.friction(p.friction, state.slip)
    force = mu * p.Fz
    v = state.v - dt * force / p.m_quarter
    omega = state.omega + dt * (p.r * force - torque) / p.J

    return v, min(max(omega, 0.0), max(v, 0.0) / p.r)


def run_braking(cfg: SimConfig) -> ScenarioResult:
    """Simulate a braking manoeuvre from ``v0`` down to ``v_stop``.

    :param cfg: The scenario.

    :return: The logged run.

    :raises SimulationAborted: If the state becomes non-finite; carries the partial result.
    """

    p = cfg.plant
    store = secure.build_cdal(p, cfg.gains, cfg.monitor, cfg.max_t)
    validator = secure.Validator(store, cfg.monitor)
    actuator = lti.discretize_tustin(plant.emb_tf(p), cfg.dt)
    gains = controller.in_command_units(cfg.gains, p.gain_scale)
    backup_gains = secure.backup_gains(store, p.gain_scale)
    # ABS engages at the equilibrium command; recovery engages the backup the same way.
    primary = controller.reset(PidState(), integral=store.equilibrium_command)
    loop = secure.LoopHandles(primary=primary, backup=PidState() if cfg.monitor.backup else None)
    nominal_view = attack.LoopView(gains=gains)
    cost = secure.iteration_cost(cfg.monitor)

    result = ScenarioResult(attack_start=cfg.attack.t_start if cfg.attack else 0.0)
    state = SimState(t=0.0, v=cfg.v0, omega=cfg.v0 / p.r)
    k = 0

    while state.v > cfg.v_stop:
        state.t = k * cfg.dt

        if state.t >= cfg.max_t:
            result.incomplete = True
            logger.warning("Safety horizon of %.1f s reached at %.3f m/s.", cfg.max_t, state.v)
            break

        snapshot = secure.cdal_ingest(store, state.t, state.omega, state.v)
        state.slip = snapshot.slip
        view = attack.apply_all(cfg.attacks, nominal_view, state.t)
        active = loop.active

        try:
            if active is ControllerId.PRIMARY:
                command = controller.pid_step(loop.primary, view.gains, view.gains.setpoint - snapshot.slip, cfg.dt)
                applied = command if view.output_override is None else view.output_override
                elapsed = cost + view.extra_delay
            elif active is ControllerId.BACKUP:
                command = controller.pid_step(loop.backup, backup_gains, backup_gains.setpoint - snapshot.slip, cfg.dt)
                applied, elapsed = command, cost
            else:
                command = applied = secure.safe_stop_command(loop, store, state.t)
                elapsed = cost
        except CorruptedFeedbackError as exc:
            raise SimulationAborted(str(exc), len(result.rows), result) from exc

        loop.last_applied = applied
        state.u = applied
        torque = max(p.gain_scale * lti.step(actuator, applied), 0.0)
        lo, hi = validator.bounds(state.t)
        detected = []

        if cfg.monitor.enabled:
            events = [
                event
                for event in (
                    validator.deadline_check(elapsed, state.t),
                    validator.semantic_check(snapshot.slip, state.t),
                )
                if event is not None
            ]

            for event in events:
                result.events.append(event)
                detected.append(event.kind.value)
                action = secure.recover(validator, event, loop)

                if action is not None:
                    result.actions.append(action)

        result.rows.append(
            Row(
                t=state.t,
                v=state.v,
                omega=state.omega,
                slip=snapshot.slip,
                bound_lo=lo,
                bound_hi=hi,
                u_commanded=command,
                u_applied=applied,
                active_controller=active,
                detected_kind="+".join(detected),
                elapsed_budget=elapsed,
            )
        )

        v, omega = _wheel_step(p, state, torque, cfg.dt)

        if not (math.isfinite(v) and math.isfinite(omega) and math.isfinite(torque)):
            logger.error("Non-finite state after row %d.", len(result.rows) - 1)
            raise SimulationAborted("Non-finite simulation state.", len(result.rows) - 1, result)

        state.v, state.omega = v, omega
        k += 1

    result.final = (k * cfg.dt, state.v)

    result.deadline_misses = validator.deadline_misses

    return result


def detection_time(result: ScenarioResult, relative: bool = False) -> Optional[float]:
    """Time of the first detection.

    :param result: A completed run.
    :param relative: Measure from the attack start instead of the manoeuvre start.

    :return: The time in seconds, or None if nothing was detected.
    """

    if not result.events:
        return None

    return result.events[0].t - (result.attack_start if relative else 0.0)


def stop_distance(result: ScenarioResult) -> float:
    """Distance covered during the run: trapezoidal integral of the vehicle speed.

    The integral runs over the logged rows and, when known, the state after
    the last step, which is the one that takes the speed below ``v_stop``.
    A run cut short by the safety horizon still returns the covered distance;
    ``result.incomplete`` flags it.
    """

    if result.incomplete:
        logger.warning("Stop distance of an incomplete run.")

    samples = [(row.t, row.v) for row in result.rows]

    if result.final is not None and samples:
        samples.append(result.final)

    if len(samples) < 2:
        return 0.0

    t, v = zip(*samples)

    return float(integrate.trapezoid(v, t))


@dataclass(frozen=True)
class SweepRow:
    """Outcome of one sweep point."""

    axis: str
    value: float
    detection_time: Optional[float]
    stop_distance: Optional[float]
    incomplete: bool = False
    error: Optional[str] = None


def sweep_config(base: SimConfig, axis: str, value: float) -> SimConfig:
    """The scenario of one sweep point: ``base`` with a single attack on ``axis``."""

    if axis not in SWEEP_AXES:
        raise ValueError(f"Unknown sweep axis. Expected one of {', '.join(SWEEP_AXES)}.", axis)

    t_start = base.attack.t_start if base.attack else 0.0

    return base.model_copy(
        update={"attacks": (AttackSpec(kind=SWEEP_AXES[axis], value=value, t_start=t_start),), "multi_attack": False}
    )


def _sweep_point(axis: str, value: float, cfg: SimConfig) -> SweepRow:
    try:
        result = run_braking(cfg)
    except (SimulationAborted, NoCrossoverError, ValueError) as exc:
        logger.error("Sweep point %s=%r failed: %s", axis, value, exc)
        return SweepRow(axis, value, None, None, error=str(exc.args[0]) if exc.args else type(exc).__name__)

    return SweepRow(axis, value, detection_time(result), stop_distance(result), result.incomplete)


def sweep(base: SimConfig, axis: str, values: Sequence[float], workers: Optional[int] = None) -> list[SweepRow]:
    """Run one scenario per value of a tampered parameter.

    :param base: Base scenario; its attack, if any, only provides the start time.
    :param axis: One of ``Kp``, ``Ki``, ``Kd``, ``setpoint``, ``output``.
    :param values: Values to sweep.
    :param workers: Worker processes; defaults to the host core count, 1 runs inline.

    :return: One row per value, in input order. Failed runs are marked in their row.
    """

    configs = [sweep_config(base, axis, value) for value in values]

    if not configs:
        return []

    workers = workers or os.cpu_count() or 1

    if workers == 1 or len(configs) == 1:
        return [_sweep_point(axis, value, cfg) for value, cfg in zip(values, configs)]

    with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as executor:
        return list(executor.map(_sweep_point, [axis] * len(configs), values, configs))
