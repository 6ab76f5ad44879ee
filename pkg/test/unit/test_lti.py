import cmath
import math

import numpy as np
import pytest

from cyfence import lti
from cyfence.exceptions import NoCrossoverError, PoleEvaluationError


def test_freq_response_first_order():
    response = lti.freq_response(lti.RationalTf((1.0,), (1.0, 1.0)), 1.0)

    assert abs(response) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert math.degrees(cmath.phase(response)) == pytest.approx(-45.0, rel=1e-12)


def test_freq_response_pure_delay():
    response = lti.freq_response(lti.RationalTf((1.0,), (1.0,), 0.01), 100.0)

    assert abs(response) == pytest.approx(1.0, rel=1e-12)
    assert cmath.phase(response) == pytest.approx(-1.0, rel=1e-12)


def test_freq_response_at_pole():
    with pytest.raises(PoleEvaluationError):
        lti.freq_response(lti.RationalTf((1.0,), (1.0, 0.0, 1.0)), 1.0)


def test_freq_response_non_positive_frequency():
    with pytest.raises(ValueError):
        lti.freq_response(lti.RationalTf((1.0,), (1.0, 1.0)), 0.0)


@pytest.mark.parametrize(
    "num, den, delay",
    [((1.0,), (0.0,), 0.0), ((1.0,), (1.0, 1.0), -0.1), ((math.nan,), (1.0, 1.0), 0.0)],
)
def test_rational_tf_invalid(num, den, delay):
    with pytest.raises(ValueError):
        lti.RationalTf(num, den, delay)


def test_rational_tf_trims_zero_coefficients():
    tf = lti.RationalTf((1.0, 0.0), (2.0, 1.0, 0.0))

    assert tf.num_coeffs == (1.0,)
    assert tf.den_degree == 1
    assert tf.is_proper


def test_series_first_order_pair():
    result = lti.series(lti.RationalTf((1.0,), (1.0, 1.0)), lti.RationalTf((1.0,), (2.0, 1.0)))

    assert result.num_coeffs == (1.0,)
    assert result.den_coeffs == (2.0, 3.0, 1.0)


def test_series_delays_add():
    result = lti.series(lti.RationalTf((1.0,), (1.0,), 0.01), lti.RationalTf((1.0,), (1.0,), 0.02))

    assert result.delay == pytest.approx(0.03, abs=1e-15)


def test_series_associative():
    a = lti.RationalTf((3.0, 1.0), (2.0, 5.0, 1.0))
    b = lti.RationalTf((70.0,), (70.0, 1.0), 0.01)
    c = lti.RationalTf((40400.0, 7191.0, 345.6), (0.0, 1.0, 0.1))

    left = lti.series(lti.series(a, b), c)
    right = lti.series(a, lti.series(b, c))

    np.testing.assert_allclose(left.num_coeffs, right.num_coeffs, rtol=1e-12)
    np.testing.assert_allclose(left.den_coeffs, right.den_coeffs, rtol=1e-12)
    assert left.delay == right.delay


def test_series_all_empty():
    with pytest.raises(ValueError):
        lti.series_all([])


@pytest.mark.parametrize("k", [0.1, 1.0, 10.0, 1000.0])
def test_integrator_margins(k):
    margins = lti.loop_margins(lti.RationalTf((k,), (0.0, 1.0)))

    assert margins.omega_c == pytest.approx(k, rel=1e-9)
    assert margins.phi_m == pytest.approx(90.0, abs=1e-9)


def test_second_order_margins():
    expected_omega = math.sqrt((math.sqrt(5) - 1) / 2)
    expected_phi = 90.0 - math.degrees(math.atan(expected_omega))
    loop = lti.RationalTf((1.0,), (0.0, 1.0, 1.0))

    omega_c = lti.crossover_frequency(loop)

    assert omega_c == pytest.approx(0.78615, abs=1e-4)
    assert omega_c == pytest.approx(expected_omega, rel=1e-9)
    assert lti.phase_margin(loop, omega_c) == pytest.approx(expected_phi, abs=1e-6)
    assert lti.phase_margin(loop, omega_c) == pytest.approx(51.827, abs=1e-3)


def test_delayed_integrator_margins():
    loop = lti.RationalTf((1.0,), (0.0, 1.0), 0.01)

    omega_c = lti.crossover_frequency(loop)

    assert omega_c == pytest.approx(1.0, rel=1e-9)
    assert lti.phase_margin(loop, omega_c) == pytest.approx(90.0 - math.degrees(0.01), abs=1e-6)


def test_crossover_is_unit_gain():
    loop = lti.RationalTf((4.0, 0.04, 4.0), (0.0, 1.0, 1.0, 1.0))

    omega_c = lti.crossover_frequency(loop)

    assert abs(lti.freq_response(loop, omega_c)) == pytest.approx(1.0, abs=1e-9)


def test_crossover_takes_largest_crossing():
    # 4/s * (s^2 + 0.01 s + 1) / (s^2 + s + 1) crosses unity three times
    loop = lti.RationalTf((4.0, 0.04, 4.0), (0.0, 1.0, 1.0, 1.0))
    grid = lti.scan_grid()
    above = np.abs(lti.rational_response(loop, grid)) > 1

    assert np.count_nonzero(above[:-1] != above[1:]) == 3
    assert lti.crossover_frequency(loop) > 2.0


def test_no_crossover():
    with pytest.raises(NoCrossoverError):
        lti.crossover_frequency(lti.RationalTf((0.5,), (1.0, 1.0)))


def test_dc_gain_consistency():
    tf = lti.RationalTf((6.0, 1.0), (3.0, 4.0, 1.0))

    assert abs(lti.freq_response(tf, 1e-7)) == pytest.approx(2.0, rel=1e-6)


def test_discretize_integrator():
    block = lti.discretize_tustin(lti.RationalTf((1.0,), (0.0, 1.0)), 0.005)

    np.testing.assert_allclose(block.input_coeffs, (0.0025, 0.0025), rtol=1e-12)
    np.testing.assert_allclose(block.output_coeffs, (1.0, -1.0), rtol=1e-12)
    assert block.delay_samples == 0


def test_discretize_delay_fifo():
    block = lti.discretize_tustin(lti.RationalTf((70.0,), (70.0, 1.0), 0.01), 0.005)

    assert block.delay_samples == 2
    assert [lti.step(block, 1.0) for _ in range(2)] == [0.0, 0.0]
    assert lti.step(block, 1.0) > 0.0


def test_discretize_invalid():
    with pytest.raises(ValueError):
        lti.discretize_tustin(lti.RationalTf((1.0,), (1.0,)), 0.0)

    with pytest.raises(ValueError):
        lti.discretize_tustin(lti.RationalTf((0.0, 1.0), (1.0,)), 0.005)


def test_step_integrator():
    block = lti.discretize_tustin(lti.RationalTf((1.0,), (0.0, 1.0)), 0.005)

    for _ in range(199):
        lti.step(block, 1.0)

    # trapezoid from rest: half a sample short of the continuous integral
    assert lti.step(block, 1.0) == pytest.approx(0.9975, abs=1e-12)


def test_step_zero_input():
    block = lti.discretize_tustin(lti.RationalTf((70.0,), (70.0, 1.0), 0.01), 0.005)

    assert all(lti.step(block, 0.0) == 0.0 for _ in range(1000))


def test_emb_step_settles():
    dt = 0.005
    block = lti.discretize_tustin(lti.RationalTf((70.0,), (70.0, 1.0)), dt)
    outputs = np.array([lti.step(block, 1.0) for _ in range(200)])
    times = np.arange(200) * dt

    assert np.all(np.abs(outputs[times >= 0.2 - 1e-12] - 1.0) <= 1e-6)

    late = times >= 0.05
    assert np.all(np.abs(outputs[late] - (1 - np.exp(-70 * times[late]))) <= 0.02)


def test_emb_impulse_area():
    dt = 0.005
    block = lti.discretize_tustin(lti.RationalTf((70.0,), (70.0, 1.0)), dt)
    outputs = [lti.step(block, 1.0 / dt)] + [lti.step(block, 0.0) for _ in range(999)]

    assert sum(outputs) * dt == pytest.approx(1.0, abs=1e-9)
    # within 2% of the continuous peak 70
    assert outputs[10] == pytest.approx(70 * math.exp(-70 * 10 * dt), abs=0.02 * 70)


def test_tustin_matches_fine_reference():
    pole = 10.0
    tf = lti.RationalTf((pole,), (pole, 1.0))
    dt = 1 / (20 * pole)
    coarse = lti.discretize_tustin(tf, dt)
    fine = lti.discretize_tustin(tf, dt / 100)

    for _ in range(100):
        expected = [lti.step(fine, 1.0) for _ in range(100)][0]
        assert lti.step(coarse, 1.0) == pytest.approx(expected, abs=0.03)


def test_closed_loop_poles():
    loop = lti.RationalTf((2.0,), (0.0, 1.0))

    np.testing.assert_allclose(lti.closed_loop_poles(loop), [-2.0])
