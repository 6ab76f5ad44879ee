"""The trusted side of the loop.

This module emulates what runs in the secure state: the controller data
abstraction layer (CDAL) that owns sensor snapshots and design-time
parameters, the output validator with its deadline and semantic checks,
and the recovery policy that switches to the backup controller.

Nothing in here is handed to the non-secure side except frozen values.
"""

import enum
import functools
import logging
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np
import pydantic

from . import controller, lti, plant
from .controller import PidGains, PidState
from .exceptions import InactiveDomainError, IsolationViolation

logger = logging.getLogger(__name__)

BOUND_MIN = -0.01
BOUND_MAX = 1.01

XI_MIN = 0.05
XI_MAX = 1.0

SPEED_BIN_MIN = 5
SPEED_BIN_MAX = 35

# Longest envelope decay stored in a lookup table; exp(-700) is still a normal float.
LUT_MAX_DECAY = 700.0
LUT_ERROR_BUDGET = 1e-3

# Modeled execution costs, in seconds.
ANALYTIC_CHECK_COST = 490e-6
LUT_CHECK_COST = 15e-6
SECURE_ENTRY_COST = 8e-6
SECURE_EXIT_COST = 4e-6

SAFE_STOP_RAMP = 0.05

# Narrowest half-width the validator enforces once the envelope has decayed.
ENVELOPE_MIN_HALF_WIDTH = 1e-4


class DetectionKind(str, enum.Enum):
    """What the validator found wrong."""

    SEMANTIC = "semantic"
    DEADLINE = "deadline"


class RecoveryPolicy(str, enum.Enum):
    """How the loop reacts to a detection."""

    SWITCH_BACKUP = "switch_backup"
    SAFE_STOP = "safe_stop"


class ControllerId(str, enum.Enum):
    """Which source drives the actuator."""

    PRIMARY = "primary"
    BACKUP = "backup"
    SAFE_STOP = "safe_stop"


class MonitorConfig(pydantic.BaseModel):
    """Validator and recovery settings."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    enabled: bool = True
    lut_enabled: bool = False
    lut_resolution: float = pydantic.Field(default=1e-3, gt=0, description="LUT step (s).")
    budget: float = pydantic.Field(default=0.005, gt=0, description="Deadline budget (s).")
    policy: RecoveryPolicy = RecoveryPolicy.SWITCH_BACKUP
    backup: bool = True


class Envelope(pydantic.BaseModel):
    """Exponential envelope ``setpoint +/- exp(-omega_n xi (t - t0))``."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    setpoint: float
    omega_n: float = pydantic.Field(gt=0)
    xi: float = pydantic.Field(gt=0, le=1)
    t0: float = 0.0

    @property
    def rate(self) -> float:
        """Decay rate ``omega_n * xi`` of the half-width, in 1/s."""

        return self.omega_n * self.xi


@dataclass(frozen=True)
class EnvelopeLut:
    """Half-width of an envelope sampled on a uniform grid of elapsed time.

    The sample ``values[k]`` is the half-width ``k * resolution`` seconds after
    the envelope origin.
    """

    resolution: float
    values: tuple[float, ...]

    @property
    def horizon(self) -> float:
        """Elapsed time covered by the table."""

        return (len(self.values) - 1) * self.resolution


@dataclass(frozen=True)
class SensorSnapshot:
    """A secured copy of the sensor readings of one loop iteration."""

    t: float
    omega: float
    v: float
    slip: float


@dataclass(frozen=True)
class DetectionEvent:
    """A validator verdict against the controlled loop."""

    t: float
    kind: DetectionKind
    measured: float
    bound: float
    speed_bin: int


@dataclass(frozen=True)
class RecoveryAction:
    """A switch of the actuator source after a detection."""

    t: float
    policy: RecoveryPolicy
    previous: ControllerId
    new: ControllerId


def xi_from_margin(phi_m: float) -> float:
    """Damping surrogate from the phase margin (degrees), ``phi_m / 100`` clamped to [0.05, 1]."""

    return min(max(phi_m / 100, XI_MIN), XI_MAX)


def envelope_from_margins(setpoint: float, margins: lti.LoopMargins, t0: float = 0.0) -> Envelope:
    """Envelope of a loop, taking the crossover frequency as natural frequency."""

    return Envelope(setpoint=setpoint, omega_n=margins.omega_c, xi=xi_from_margin(margins.phi_m), t0=t0)


def half_width(env: Envelope, t: float | np.ndarray) -> float | np.ndarray:
    """Half-width of the envelope at time ``t``; accepts arrays."""

    elapsed = np.asarray(t, dtype=float) - env.t0

    if np.any(elapsed < 0):
        raise ValueError("Envelope evaluated before its origin.", t)

    return np.exp(-env.rate * elapsed)


def envelope_bounds(env: Envelope, t: float | np.ndarray, clamp: bool = True, min_width: float = 0.0) -> tuple:
    """Lower and upper bound of the envelope.

    :param env: The envelope.
    :param t: Time in seconds, not earlier than ``env.t0``. Arrays are evaluated element-wise.
    :param clamp: Whether to clamp the bounds to the physical slip range.
    :param min_width: Smallest half-width; the decay stops there.

    :return: ``(lo, hi)``, floats for scalar input and arrays otherwise.
    """

    width = np.maximum(half_width(env, t), min_width)
    lo, hi = env.setpoint - width, env.setpoint + width

    if clamp:
        lo, hi = np.maximum(lo, BOUND_MIN), np.minimum(hi, BOUND_MAX)

    if np.ndim(lo) == 0:
        return float(lo), float(hi)

    return lo, hi


def lut_build(env: Envelope, resolution: float, horizon: float) -> EnvelopeLut:
    """Sample the half-width of an envelope into a lookup table.

    :param env: The envelope; only its decay rate matters.
    :param resolution: Sample step in seconds.
    :param horizon: Elapsed time to cover, in seconds.

    :raises ValueError: If the grid is invalid or too coarse for the error budget.
    """

    if not resolution > 0 or not horizon > 0:
        raise ValueError("LUT resolution and horizon must be positive.", resolution, horizon)

    if resolution > horizon:
        raise ValueError("LUT resolution exceeds its horizon.", resolution, horizon)

    # linear interpolation error of exp(-a t) is bounded by a^2 h^2 / 8
    if (env.rate * resolution) ** 2 / 8 > LUT_ERROR_BUDGET:
        raise ValueError("LUT resolution too coarse for the envelope rate.", resolution, env.rate)

    count = int(math.floor(horizon / resolution + 1e-9)) + 1
    values = np.exp(-env.rate * (np.arange(count) * resolution))

    if np.any(np.diff(values) >= 0):
        raise ValueError("LUT horizon too long for the envelope rate.", horizon, env.rate)

    return EnvelopeLut(resolution=resolution, values=tuple(values.tolist()))


def lut_lookup(lut: EnvelopeLut, elapsed: float) -> float:
    """Interpolated half-width ``elapsed`` seconds after the envelope origin.

    Past the horizon the last value is returned.
    """

    position = elapsed / lut.resolution

    if position <= 0:
        return lut.values[0]

    index = int(position)

    if index >= len(lut.values) - 1:
        return lut.values[-1]

    low = lut.values[index]

    return low + (lut.values[index + 1] - low) * (position - index)


def lut_bounds(env: Envelope, lut: EnvelopeLut, t: float, min_width: float = 0.0) -> tuple[float, float]:
    """Clamped envelope bounds through the lookup table, never narrower than ``min_width``."""

    width = max(lut_lookup(lut, t - env.t0), min_width)

    return max(env.setpoint - width, BOUND_MIN), min(env.setpoint + width, BOUND_MAX)


def speed_bin(v: float) -> int:
    """Design-time speed bin of a vehicle speed; half-speeds round up."""

    return min(max(math.floor(v + 0.5), SPEED_BIN_MIN), SPEED_BIN_MAX)


class CdalStore:
    """Secure store of design-time parameters and sensor snapshots.

    Gains, per-bin envelopes, lookup tables and the equilibrium command are
    fixed at construction and exposed read-only. Only :func:`cdal_ingest`
    updates the sensor snapshot.
    """

    __slots__ = (
        "_gains",
        "_envelopes",
        "_luts",
        "_equilibrium_command",
        "_wheel_radius",
        "_snapshot",
        "_ingest_count",
        "_sealed",
    )

    _VOLATILE = frozenset(("_snapshot", "_ingest_count"))

    def __init__(
        self,
        gains: PidGains,
        envelopes: Mapping[int, Envelope],
        luts: Mapping[int, EnvelopeLut],
        equilibrium_command: float,
        wheel_radius: float,
    ):
        self._gains = gains
        self._envelopes = MappingProxyType(dict(envelopes))
        self._luts = MappingProxyType(dict(luts))
        self._equilibrium_command = float(equilibrium_command)
        self._wheel_radius = float(wheel_radius)
        self._snapshot: Optional[SensorSnapshot] = None
        self._ingest_count = 0
        self._sealed = True

    def __setattr__(self, name, value):
        if getattr(self, "_sealed", False) and name not in self._VOLATILE:
            raise IsolationViolation(f"CDAL field {name!r} is read-only.")

        super().__setattr__(name, value)

    def __delattr__(self, name):
        raise IsolationViolation(f"CDAL field {name!r} cannot be deleted.")

    @property
    def gains(self) -> PidGains:
        """Nominal controller gains."""

        return self._gains

    @property
    def envelopes(self) -> Mapping[int, Envelope]:
        """Envelope parameters per speed bin, with origin 0."""

        return self._envelopes

    @property
    def luts(self) -> Mapping[int, EnvelopeLut]:
        """Half-width lookup tables per speed bin (empty when disabled)."""

        return self._luts

    @property
    def equilibrium_command(self) -> float:
        """Controller command holding the slip at its linearization point."""

        return self._equilibrium_command

    @property
    def wheel_radius(self) -> float:
        """Wheel radius used for slip computation, in m."""

        return self._wheel_radius

    @property
    def snapshot(self) -> Optional[SensorSnapshot]:
        """The latest secured sensor snapshot."""

        return self._snapshot

    @property
    def ingest_count(self) -> int:
        """Number of snapshots ingested so far."""

        return self._ingest_count


@functools.lru_cache(maxsize=32)
def bin_margins(plant_params: plant.PlantParams, gains: PidGains) -> tuple[tuple[float, lti.LoopMargins], ...]:
    """Loop margins of every speed bin (cached)."""

    speeds = [float(v) for v in range(SPEED_BIN_MIN, SPEED_BIN_MAX + 1)]

    return tuple(plant.margins_grid(plant_params, gains, speeds))


def build_cdal(plant_params: plant.PlantParams, gains: PidGains, monitor: MonitorConfig, horizon: float) -> CdalStore:
    """Precompute the design-time content of the secure store.

    :param plant_params: Plant parameters.
    :param gains: Nominal controller gains.
    :param monitor: Validator settings; lookup tables are built when enabled.
    :param horizon: Longest elapsed time the envelopes must cover, in seconds.

    :return: The sealed store.
    """

    envelopes = {
        int(speed): envelope_from_margins(gains.setpoint, margins)
        for speed, margins in bin_margins(plant_params, gains)
    }
    luts = {}

    if monitor.lut_enabled:
        for key, env in envelopes.items():
            luts[key] = lut_build(env, monitor.lut_resolution, min(horizon, LUT_MAX_DECAY / env.rate))

    limits = controller.in_command_units(gains, plant_params.gain_scale)
    command = plant_params.equilibrium_torque / plant_params.gain_scale
    command = min(max(command, limits.u_min), limits.u_max)

    return CdalStore(gains, envelopes, luts, command, plant_params.r)


def backup_gains(store: CdalStore, gain_scale: float) -> PidGains:
    """Gains of the backup controller in command units.

    The backup runs the stored nominal gains and never commands a negative
    brake torque.
    """

    gains = controller.in_command_units(store.gains, gain_scale)

    return gains.model_copy(update={"u_min": max(gains.u_min, 0.0)})


def cdal_ingest(store: CdalStore, t: float, omega: float, v: float) -> SensorSnapshot:
    """Secure the sensor readings of one loop iteration.

    :param store: The secure store.
    :param t: Iteration time in seconds.
    :param omega: Wheel angular speed in rad/s.
    :param v: Vehicle speed in m/s.

    :return: The snapshot, handed to the controller by value.

    :raises InactiveDomainError: If ``v <= 0``.
    """

    if not v > 0:
        raise InactiveDomainError("ABS inactive domain.", v)

    snapshot = SensorSnapshot(t=t, omega=omega, v=v, slip=(v - omega * store.wheel_radius) / v)
    store._snapshot = snapshot  # pylint: disable=protected-access
    store._ingest_count += 1  # pylint: disable=protected-access

    return snapshot


def iteration_cost(monitor: MonitorConfig) -> float:
    """Modeled execution time of one iteration spent in the secure state."""

    if not monitor.enabled:
        return 0.0

    check = LUT_CHECK_COST if monitor.lut_enabled else ANALYTIC_CHECK_COST

    return check + SECURE_ENTRY_COST + SECURE_EXIT_COST


class Validator:
    """Output validator: deadline and semantic checks over the secure store.

    Each detection kind is reported once per envelope epoch; an epoch
    starts at engagement and again at every recovery switch.
    """

    def __init__(self, store: CdalStore, config: MonitorConfig, t0: float = 0.0):
        self.store = store
        self.config = config
        self.epoch_start = t0
        self.deadline_misses = 0
        self._reported: set[DetectionKind] = set()

    def new_epoch(self, t: float):
        """Restart the envelope clock at ``t``."""

        self.epoch_start = t
        self._reported.clear()

    def active_bin(self, speed: Optional[float] = None) -> int:
        """Speed bin of ``speed``, or of the latest snapshot."""

        if speed is None:
            if self.store.snapshot is None:
                raise ValueError("No sensor snapshot ingested.")

            speed = self.store.snapshot.v

        return speed_bin(speed)

    def envelope(self, speed: Optional[float] = None) -> Envelope:
        """Envelope of the active speed bin, anchored at the epoch start."""

        env = self.store.envelopes[self.active_bin(speed)]

        return env.model_copy(update={"t0": self.epoch_start})

    def bounds(self, t: float, speed: Optional[float] = None) -> tuple[float, float]:
        """Clamped bounds at ``t``, through the LUT when enabled.

        The half-width never decays below ``ENVELOPE_MIN_HALF_WIDTH``.
        """

        env = self.envelope(speed)

        if self.config.lut_enabled:
            return lut_bounds(env, self.store.luts[self.active_bin(speed)], t, ENVELOPE_MIN_HALF_WIDTH)

        return envelope_bounds(env, t, min_width=ENVELOPE_MIN_HALF_WIDTH)

    def _report(self, event: DetectionEvent) -> Optional[DetectionEvent]:
        if event.kind in self._reported:
            return None

        self._reported.add(event.kind)
        logger.info(
            "Detection: %s at t=%.3f s (measured %r, bound %r).", event.kind.value, event.t, event.measured, event.bound
        )

        return event

    def semantic_check(self, measured: float, t: float, speed: Optional[float] = None) -> Optional[DetectionEvent]:
        """Check the measured slip against the envelope.

        A non-finite measurement always violates.

        :return: A detection event, or None when inside the bounds or already reported this epoch.
        """

        lo, hi = self.bounds(t, speed)

        if math.isfinite(measured) and lo <= measured <= hi:
            return None

        bound = lo if math.isfinite(measured) and measured < lo else hi

        return self._report(DetectionEvent(t, DetectionKind.SEMANTIC, measured, bound, self.active_bin(speed)))

    def deadline_check(self, elapsed: float, t: float, speed: Optional[float] = None) -> Optional[DetectionEvent]:
        """Check the modeled iteration time against the budget; the budget itself is on time."""

        if elapsed <= self.config.budget:
            return None

        self.deadline_misses += 1
        event = DetectionEvent(t, DetectionKind.DEADLINE, elapsed, self.config.budget, self.active_bin(speed))

        return self._report(event)


@dataclass
class LoopHandles:
    """The controllers a recovery can act on."""

    primary: PidState
    backup: Optional[PidState]
    active: ControllerId = ControllerId.PRIMARY
    safe_stop_since: float = 0.0
    safe_stop_from: float = 0.0
    last_applied: float = 0.0


def recover(validator: Validator, detection: DetectionEvent, loop: LoopHandles) -> Optional[RecoveryAction]:
    """Apply the recovery policy after a detection.

    ``switch_backup`` resets the backup controller, engages it at the
    equilibrium command like the primary and restarts the envelope clock. ``safe_stop``
    bypasses the controllers and ramps the command to the equilibrium
    command; it is also used when no backup is configured.

    :return: The action, or None if a recovery already happened.
    """

    if loop.active is not ControllerId.PRIMARY:
        logger.warning("Recovery already performed, ignoring request at t=%.3f s.", detection.t)
        return None

    policy = validator.config.policy

    if loop.backup is None:
        policy = RecoveryPolicy.SAFE_STOP

    if policy is RecoveryPolicy.SWITCH_BACKUP:
        controller.reset(loop.backup, integral=validator.store.equilibrium_command)
        loop.active = ControllerId.BACKUP
    else:
        loop.active = ControllerId.SAFE_STOP
        loop.safe_stop_since = detection.t
        loop.safe_stop_from = loop.last_applied

    validator.new_epoch(detection.t)
    action = RecoveryAction(detection.t, policy, ControllerId.PRIMARY, loop.active)
    logger.info("Recovery: %s at t=%.3f s.", policy.value, detection.t)

    return action


def safe_stop_command(loop: LoopHandles, store: CdalStore, t: float) -> float:
    """Controller-bypassing command while in safe stop."""

    progress = min(max((t - loop.safe_stop_since) / SAFE_STOP_RAMP, 0.0), 1.0)

    return loop.safe_stop_from + (store.equilibrium_command - loop.safe_stop_from) * progress
