"""Physical models of the braking corner.

The linear models (single-corner slip dynamics and the electro-mechanical
brake) feed the loop analysis; the Burckhardt friction curve and the wheel
and vehicle equations drive the nonlinear braking simulation. Both sides
read the same :class:`PlantParams`, and the slope of the friction curve at
the linearization slip is the friction gain of the linear model, so the two
never disagree.
"""

import logging
import math
from typing import Iterable

import numpy as np
import pydantic
from scipy import optimize

from . import lti
from .controller import PidGains, pid_tf
from .exceptions import NoCrossoverError

logger = logging.getLogger(__name__)

GRAVITY = 9.81
ABS_MIN_SPEED = 5.0

# Peak slip target of the calibrated curve, inside the 0.12 +/- 0.02 band and
# above the setpoint so that the friction slope at the setpoint is positive.
DEFAULT_PEAK_SLIP = 0.14
DEFAULT_PEAK_MU = 1.0
PEAK_TOLERANCE = 0.02
# rounding slack on the band edge
PEAK_TOLERANCE_SLACK = 1e-9


class FrictionCurve(pydantic.BaseModel):
    """Burckhardt longitudinal friction curve ``mu = c1 (1 - exp(-c2 lambda)) - c3 lambda``.

    The defaults are the classic dry-asphalt set; see :func:`calibrate_friction`.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    c1: float = pydantic.Field(default=1.28, gt=0)
    c2: float = pydantic.Field(default=23.99, gt=0)
    c3: float = pydantic.Field(default=0.52, gt=0)

    @pydantic.model_validator(mode="after")
    def _check_shape(self) -> "FrictionCurve":
        if self.c1 * self.c2 <= self.c3:
            raise ValueError("Friction curve has no interior maximum (c1 * c2 must exceed c3).")

        if not 0 < peak_slip(self) < 1:
            raise ValueError("Friction curve peak must lie inside (0, 1).")

        if self.c1 * (1 - math.exp(-self.c2)) < self.c3:
            raise ValueError("Friction curve must be non-negative on [0, 1].")

        return self


def peak_slip(curve: FrictionCurve) -> float:
    """Analytic location of the friction peak, ``ln(c1 c2 / c3) / c2``."""

    return math.log(curve.c1 * curve.c2 / curve.c3) / curve.c2


def friction(curve: FrictionCurve, slip: float) -> tuple[float, float]:
    """Evaluate the friction curve and its slope.

    Slip outside [0, 1] is clamped, with a warning.

    :param curve: The friction curve.
    :param slip: Longitudinal slip.

    :return: ``(mu, dmu/dlambda)``.
    """

    if not 0.0 <= slip <= 1.0:
        logger.warning("Slip %r outside [0, 1], clamping.", slip)
        slip = min(max(slip, 0.0), 1.0)

    decay = math.exp(-curve.c2 * slip)

    return curve.c1 * (1 - decay) - curve.c3 * slip, curve.c1 * curve.c2 * decay - curve.c3


def calibrate_friction(
    curve: FrictionCurve, target_peak: float = DEFAULT_PEAK_SLIP, peak_mu_max: float = DEFAULT_PEAK_MU
) -> FrictionCurve:
    """Move the friction peak to a target slip.

    ``c2`` is solved so that the analytic peak lands on ``target_peak``; then
    ``c1`` and ``c3`` are scaled together (which leaves the peak location
    unchanged) so that the peak friction does not exceed ``peak_mu_max``.

    :param curve: The curve to calibrate.
    :param target_peak: Desired peak slip.
    :param peak_mu_max: Upper limit of the peak friction coefficient.

    :return: The calibrated curve.
    """

    def peak_offset(c2: float) -> float:
        return math.log(curve.c1 * c2 / curve.c3) - target_peak * c2

    low, high = 1 / target_peak, 100 / target_peak

    if peak_offset(low) <= 0:
        raise ValueError("Friction curve cannot be moved to the requested peak.", target_peak)

    c2 = optimize.brentq(peak_offset, low, high, xtol=1e-14)
    shifted = FrictionCurve(c1=curve.c1, c2=c2, c3=curve.c3)
    peak_mu, _ = friction(shifted, target_peak)
    scale = min(1.0, peak_mu_max / peak_mu)

    logger.debug("Friction calibration: c2=%r, scale=%r", c2, scale)

    return FrictionCurve(c1=curve.c1 * scale, c2=c2, c3=curve.c3 * scale)


def calibrated_dry_asphalt() -> FrictionCurve:
    """The default friction curve of the simulator."""

    return calibrate_friction(FrictionCurve())


# pylint: disable=invalid-name
class PlantParams(pydantic.BaseModel):
    """Physical constants of the single-corner model and of the brake actuator."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    r: float = pydantic.Field(default=0.30, gt=0, description="Wheel radius (m).")
    J: float = pydantic.Field(default=1.0, gt=0, description="Wheel moment of inertia (kg m^2).")
    m_quarter: float = pydantic.Field(default=400.0, gt=0, description="Quarter-vehicle mass (kg).")
    Fz: float = pydantic.Field(default=400.0 * GRAVITY, gt=0, description="Normal force (N).")
    lambda_bar: float = pydantic.Field(default=0.12, gt=0, lt=1, description="Linearization slip.")
    v_bar: float = pydantic.Field(default=30.0, gt=0, description="Linearization speed (m/s).")
    omega_act: float = pydantic.Field(default=70.0, gt=0, description="Actuator bandwidth (rad/s).")
    tau: float = pydantic.Field(default=0.010, gt=0, description="Actuator delay (s).")
    gain_scale: float = pydantic.Field(default=0.45, gt=0, description="Calibrated plant-gain scalar.")
    friction: FrictionCurve = pydantic.Field(default_factory=calibrated_dry_asphalt)

    @pydantic.model_validator(mode="after")
    def _check_friction(self) -> "PlantParams":
        if abs(peak_slip(self.friction) - self.lambda_bar) > PEAK_TOLERANCE + PEAK_TOLERANCE_SLACK:
            raise ValueError(f"Friction peak must lie within {PEAK_TOLERANCE} of lambda_bar.")

        if self.mu1 <= 0:
            raise ValueError("Friction slope at lambda_bar (mu1) must be positive.")

        return self

    @property
    def mu1(self) -> float:
        """Friction slope at the linearization slip."""

        return friction(self.friction, self.lambda_bar)[1]

    @property
    def equilibrium_torque(self) -> float:
        """Brake torque that holds the slip at ``lambda_bar``, in N m.

        The value does not depend on the vehicle speed.
        """

        mu, _ = friction(self.friction, self.lambda_bar)
        inertia_ratio = self.J * (1 - self.lambda_bar) / (self.m_quarter * self.r**2)

        return self.Fz * mu * self.r * (1 + inertia_ratio)


# pylint: enable=invalid-name


def single_corner_pole(p: PlantParams) -> float:
    """Pole magnitude of the single-corner model at ``(lambda_bar, v_bar)``, in rad/s."""

    return p.mu1 * (p.Fz / (p.m_quarter * p.v_bar)) * (1 - p.lambda_bar + p.m_quarter * p.r**2 / p.J)


def single_corner_tf(p: PlantParams) -> lti.RationalTf:
    """Braking torque to wheel slip, linearized at ``(lambda_bar, v_bar)``."""

    gain = p.gain_scale * p.r / (p.J * p.v_bar)

    return lti.RationalTf((gain,), (single_corner_pole(p), 1.0))


def emb_tf(p: PlantParams) -> lti.RationalTf:
    """Electro-mechanical brake: first-order lag with transport delay.

    The delay is applied as a phase lag ``e^(-s tau)``.
    """

    return lti.RationalTf((p.omega_act,), (p.omega_act, 1.0), p.tau)


def plant_tf(p: PlantParams) -> lti.RationalTf:
    """The controlled dynamics: single corner in series with the brake."""

    return lti.series(single_corner_tf(p), emb_tf(p))


def loop_tf(p: PlantParams, g: PidGains) -> lti.RationalTf:
    """Loop transfer function: controller, single corner and brake in series."""

    return lti.series_all([pid_tf(g), single_corner_tf(p), emb_tf(p)])


def at_speed(p: PlantParams, speed: float) -> PlantParams:
    """A copy of the parameters linearized at another speed."""

    return PlantParams.model_validate({**p.model_dump(), "v_bar": speed})


def margins_grid(p: PlantParams, g: PidGains, speeds: Iterable[float]) -> list[tuple[float, lti.LoopMargins]]:
    """Loop margins over a grid of linearization speeds.

    :param p: Plant parameters; ``v_bar`` is replaced by each speed.
    :param g: Controller gains.
    :param speeds: Speeds in m/s, each inside the ABS active region.

    :return: ``(speed, margins)`` pairs in input order.
    """

    result = []

    for speed in speeds:
        if speed < ABS_MIN_SPEED:
            raise ValueError(f"Speed must be at least {ABS_MIN_SPEED} m/s.", speed)

        margins = lti.loop_margins(loop_tf(at_speed(p, speed), g))

        if margins.phi_m <= 0:
            logger.warning("Non-positive phase margin %.3f deg at %.1f m/s.", margins.phi_m, speed)

        result.append((float(speed), margins))

    return result


def crossover_trend(grid: list[tuple[float, lti.LoopMargins]]) -> str:
    """Describe how the crossover frequency moves with speed.

    :return: ``"increasing"``, ``"decreasing"`` or ``"mixed"`` (in speed order).
    """

    ordered = [m.omega_c for _, m in sorted(grid, key=lambda entry: entry[0])]
    steps = np.diff(ordered)

    if np.all(steps > 0):
        return "increasing"

    if np.all(steps < 0):
        return "decreasing"

    return "mixed"


def speed_bins(low: float = ABS_MIN_SPEED, high: float = 35.0) -> list[float]:
    """The 1 m/s design grid of linearization speeds."""

    return [float(v) for v in range(math.ceil(low), math.floor(high) + 1)]


def calibrate_gain_scale(
    p: PlantParams,
    g: PidGains,
    reference_speed: float = 30.0,
    band: tuple[float, float] = (30.0, 80.0),
    floor: float = 20.0,
    ladder: Iterable[float] = tuple(np.round(np.arange(1.0, 0.0, -0.05), 2)),
) -> float:
    """Find the plant-gain scalar that makes the nominal gains fit the plant.

    Candidates are tried in ladder order; the first one that puts the phase
    margin at ``reference_speed`` inside ``band`` and keeps every speed bin
    above ``floor`` degrees is returned.

    :raises ValueError: If no candidate qualifies.
    """

    for scale in ladder:
        candidate = PlantParams.model_validate({**p.model_dump(), "gain_scale": float(scale)})

        try:
            reference = lti.loop_margins(loop_tf(at_speed(candidate, reference_speed), g))
            grid = [lti.loop_margins(loop_tf(at_speed(candidate, v), g)) for v in speed_bins()]
        except NoCrossoverError:
            logger.debug("Gain scale %r: no crossover.", scale)
            continue

        worst = min(m.phi_m for m in grid)
        logger.debug("Gain scale %r: phi_m(ref)=%.2f, worst=%.2f", scale, reference.phi_m, worst)

        if band[0] <= reference.phi_m <= band[1] and worst >= floor:
            return float(scale)

    raise ValueError("No gain scale satisfies the margin requirements.")
