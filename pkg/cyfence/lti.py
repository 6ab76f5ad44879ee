"""Continuous-time transfer functions.

This module contains the transfer-function arithmetic used to build the
ABS loop, the frequency-response kernel, the crossover and phase-margin
solvers, and the Tustin discretization that turns continuous blocks into
difference equations stepped at the loop rate.

Polynomials are stored in ascending powers of ``s``, the convention of
:mod:`numpy.polynomial.polynomial`.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pydantic
from numpy.polynomial import polynomial as npoly
from scipy import optimize, signal

from .exceptions import NoCrossoverError, PoleEvaluationError

SCAN_OMEGA_MIN = 1e-3
SCAN_OMEGA_MAX = 1e6
SCAN_POINTS = 2000

# brentq refuses a relative tolerance below 4 * machine epsilon
ROOT_RTOL = 4 * np.finfo(float).eps


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    """Drop highest-degree zero coefficients, keeping at least one term."""

    trimmed = np.trim_zeros(np.asarray(list(coeffs), dtype=float), "b")

    return tuple(float(c) for c in trimmed) if trimmed.size else (0.0,)


@dataclass(frozen=True)
class RationalTf:
    """Delayed rational transfer function ``num(s) / den(s) * e^(-s * delay)``.

    :param num_coeffs: Numerator coefficients, ascending powers of s.
    :param den_coeffs: Denominator coefficients, ascending powers of s.
    :param delay: Transport delay in seconds.
    """

    num_coeffs: tuple[float, ...]
    den_coeffs: tuple[float, ...]
    delay: float = 0.0

    def __post_init__(self):
        num = _trim(self.num_coeffs)
        den = _trim(self.den_coeffs)

        if not all(np.isfinite(num)) or not all(np.isfinite(den)):
            raise ValueError("Transfer function coefficients must be finite.", num, den)

        if den == (0.0,):
            raise ValueError("Denominator must have at least one nonzero coefficient.", self.den_coeffs)

        if not np.isfinite(self.delay) or self.delay < 0:
            raise ValueError("Delay must be finite and non-negative.", self.delay)

        object.__setattr__(self, "num_coeffs", num)
        object.__setattr__(self, "den_coeffs", den)
        object.__setattr__(self, "delay", float(self.delay))

    @property
    def num_degree(self) -> int:
        """Degree of the numerator polynomial."""

        return len(self.num_coeffs) - 1

    @property
    def den_degree(self) -> int:
        """Degree of the denominator polynomial."""

        return len(self.den_coeffs) - 1

    @property
    def is_proper(self) -> bool:
        """Whether ``degree(num) <= degree(den)``."""

        return self.num_degree <= self.den_degree


class LoopMargins(pydantic.BaseModel):
    """Gain-crossover frequency and phase margin of a loop transfer function."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    omega_c: float = pydantic.Field(gt=0, description="Gain-crossover frequency (rad/s).")
    phi_m: float = pydantic.Field(description="Phase margin (degrees).")


@dataclass
class DiscreteLti:
    """Difference equation realizing a continuous block at a fixed step.

    ``output_coeffs[0] * y[k] = sum(input_coeffs[i] * u[k - i]) - sum(output_coeffs[i] * y[k - i], i >= 1)``
    with ``output_coeffs[0] == 1``. The transport delay is realized as a FIFO
    of ``delay_samples`` input samples in front of the difference equation.
    """

    input_coeffs: tuple[float, ...]
    output_coeffs: tuple[float, ...]
    dt: float
    delay_samples: int = 0
    inputs: deque = field(init=False, repr=False)
    outputs: deque = field(init=False, repr=False)
    fifo: deque = field(init=False, repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("Discretization step must be positive.", self.dt)

        if self.delay_samples < 0:
            raise ValueError("Delay sample count must be non-negative.", self.delay_samples)

        self.inputs = deque([0.0] * len(self.input_coeffs), maxlen=len(self.input_coeffs))
        self.outputs = deque([0.0] * (len(self.output_coeffs) - 1), maxlen=len(self.output_coeffs) - 1)
        self.fifo = deque([0.0] * self.delay_samples)


def _as_complex_grid(omega: float | np.ndarray) -> np.ndarray:
    return 1j * np.asarray(omega, dtype=float)


def rational_response(tf: RationalTf, omega: float | np.ndarray) -> np.ndarray:
    """Evaluate ``num(jw) / den(jw)``, ignoring the delay.

    Accepts scalars or arrays of frequencies.

    :raises PoleEvaluationError: If any frequency is exactly a pole.
    """

    s = _as_complex_grid(omega)
    den = npoly.polyval(s, tf.den_coeffs)

    if np.any(den == 0):
        raise PoleEvaluationError("Evaluation at pole.", omega)

    return npoly.polyval(s, tf.num_coeffs) / den


def freq_response(tf: RationalTf, omega: float) -> complex:
    """Evaluate a transfer function on the imaginary axis.

    :param tf: The transfer function.
    :param omega: Angular frequency in rad/s, strictly positive.

    :return: ``num(jw) / den(jw) * e^(-jw * delay)``.
    """

    if not omega > 0:
        raise ValueError("Frequency must be positive.", omega)

    return complex(rational_response(tf, omega) * np.exp(-1j * omega * tf.delay))


def series(a: RationalTf, b: RationalTf) -> RationalTf:
    """Connect two transfer functions in series.

    Numerators and denominators multiply, delays add.
    """

    return RationalTf(
        tuple(npoly.polymul(a.num_coeffs, b.num_coeffs)),
        tuple(npoly.polymul(a.den_coeffs, b.den_coeffs)),
        a.delay + b.delay,
    )


def series_all(blocks: Sequence[RationalTf]) -> RationalTf:
    """Series composition of a non-empty sequence of blocks, left to right."""

    if not blocks:
        raise ValueError("At least one block is required.")

    result = blocks[0]

    for block in blocks[1:]:
        result = series(result, block)

    return result


def closed_loop_poles(loop: RationalTf) -> np.ndarray:
    """Roots of ``den(s) + num(s)`` for the delay-free part of a unity-feedback loop."""

    return npoly.polyroots(npoly.polyadd(loop.den_coeffs, loop.num_coeffs))


def scan_grid() -> np.ndarray:
    """The log-spaced frequency grid used by the margin solvers."""

    return np.geomspace(SCAN_OMEGA_MIN, SCAN_OMEGA_MAX, SCAN_POINTS)


def _log_gain(tf: RationalTf, omega: float) -> float:
    return float(np.log(np.abs(rational_response(tf, omega))))


def crossover_frequency(loop: RationalTf) -> float:
    """Find the gain-crossover frequency of a loop transfer function.

    The magnitude is scanned on :func:`scan_grid`; every bracket where it
    crosses unity is a candidate and the highest one is refined with Brent's
    method. The delay does not affect the magnitude.

    :param loop: Loop transfer function.

    :return: The crossover frequency in rad/s.

    :raises NoCrossoverError: If the magnitude never crosses unity in the scan range.
    """

    grid = scan_grid()

    with np.errstate(divide="ignore"):
        log_gain = np.log(np.abs(rational_response(loop, grid)))

    above = log_gain > 0
    crossings = np.flatnonzero(above[:-1] != above[1:])

    if crossings.size == 0:
        raise NoCrossoverError("No crossover.", (SCAN_OMEGA_MIN, SCAN_OMEGA_MAX))

    index = crossings[-1]
    low, high = grid[index], grid[index + 1]

    return float(
        optimize.brentq(lambda omega: _log_gain(loop, omega), low, high, xtol=low * ROOT_RTOL, rtol=ROOT_RTOL)
    )


def _low_frequency_phase(tf: RationalTf) -> float:
    """Asymptotic phase of the rational part as omega -> 0+, in radians."""

    num = np.asarray(tf.num_coeffs)
    den = np.asarray(tf.den_coeffs)
    zeros_at_origin = int(np.argmax(num != 0))
    poles_at_origin = int(np.argmax(den != 0))
    leading = num[zeros_at_origin] / den[poles_at_origin]

    return (0.0 if leading > 0 else -np.pi) + (zeros_at_origin - poles_at_origin) * np.pi / 2


def unwrapped_phase(tf: RationalTf, omega: np.ndarray) -> np.ndarray:
    """Continuous phase along an increasing frequency grid, in radians.

    The rational part is unwrapped from its low-frequency asymptote; the
    delay contributes the exact ``-w * delay``.
    """

    phase = np.unwrap(np.angle(rational_response(tf, omega)))
    phase += 2 * np.pi * np.round((_low_frequency_phase(tf) - phase[0]) / (2 * np.pi))

    return phase - omega * tf.delay


def phase_margin(loop: RationalTf, omega_c: float) -> float:
    """Phase margin of a loop at its crossover frequency.

    :param loop: Loop transfer function.
    :param omega_c: Crossover frequency, as returned by :func:`crossover_frequency`.

    :return: ``180 + arg L(j omega_c)`` in degrees, with the phase unwrapped from omega -> 0+.
    """

    grid = scan_grid()
    omega = np.append(grid[grid < omega_c], omega_c)

    return float(180.0 + np.degrees(unwrapped_phase(loop, omega)[-1]))


def loop_margins(loop: RationalTf) -> LoopMargins:
    """Crossover frequency and phase margin of a loop."""

    omega_c = crossover_frequency(loop)

    return LoopMargins(omega_c=omega_c, phi_m=phase_margin(loop, omega_c))


def discretize_tustin(tf: RationalTf, dt: float) -> DiscreteLti:
    """Discretize a proper transfer function with the bilinear transform.

    The delay is rounded to the nearest whole number of samples and realized
    as a FIFO. The returned block starts from rest.

    :param tf: Proper transfer function.
    :param dt: Step in seconds.

    :return: The difference-equation block.
    """

    if not dt > 0:
        raise ValueError("Discretization step must be positive.", dt)

    if not tf.is_proper:
        raise ValueError("Only proper transfer functions can be discretized.", tf)

    input_coeffs, output_coeffs = signal.bilinear(tf.num_coeffs[::-1], tf.den_coeffs[::-1], fs=1.0 / dt)
    input_coeffs = np.atleast_1d(input_coeffs)
    output_coeffs = np.atleast_1d(output_coeffs)

    # scipy strips leading numerator zeros; restore alignment with u[k]
    input_coeffs = np.concatenate([np.zeros(max(len(output_coeffs) - len(input_coeffs), 0)), input_coeffs])

    return DiscreteLti(
        input_coeffs=tuple(float(c) for c in input_coeffs / output_coeffs[0]),
        output_coeffs=tuple(float(c) for c in output_coeffs / output_coeffs[0]),
        dt=dt,
        delay_samples=int(np.rint(tf.delay / dt)),
    )


def step(block: DiscreteLti, u: float) -> float:
    """Advance a discrete block by one sample.

    :param block: The block, mutated in place.
    :param u: Input sample.

    :return: Output sample.
    """

    if block.delay_samples:
        block.fifo.append(u)
        u = block.fifo.popleft()

    block.inputs.appendleft(u)
    y = sum(b * x for b, x in zip(block.input_coeffs, block.inputs))
    y -= sum(a * past for a, past in zip(block.output_coeffs[1:], block.outputs))
    block.outputs.appendleft(y)

    return y
