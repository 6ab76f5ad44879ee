"""Host microbenchmark of the semantic check.

Compares the analytic envelope against the lookup-table envelope, each
followed by the bounds comparison, one timed call at a time.
"""

import time
from typing import Callable

import numpy as np
import pydantic

from . import secure

MIN_ITERATIONS = 100_000

BENCH_SETPOINT = 0.12
BENCH_OMEGA_N = 17.85
BENCH_XI = 0.455
BENCH_HORIZON = 5.0


class BenchReport(pydantic.BaseModel):
    """Per-call cost of each check path, in seconds."""

    model_config = pydantic.ConfigDict(frozen=True)

    iterations: int
    analytic_mean: float
    analytic_p99: float
    lut_mean: float
    lut_p99: float
    deadline: float

    @property
    def passed(self) -> bool:
        """LUT faster than analytic on average, and both well inside the deadline."""

        return self.lut_mean < self.analytic_mean and max(self.lut_mean, self.analytic_mean) < self.deadline


def _time_calls(check: Callable[[float, float], bool], times: list[float], slips: list[float]) -> np.ndarray:
    costs = np.empty(len(times))
    clock = time.perf_counter_ns

    for i, (t, slip) in enumerate(zip(times, slips)):
        start = clock()
        check(t, slip)
        costs[i] = clock() - start

    return costs * 1e-9


def run_bench(iterations: int, seed: int = 0, deadline: float = 0.005) -> BenchReport:
    """Time both semantic-check paths.

    :param iterations: Calls per path, at least :data:`MIN_ITERATIONS`.
    :param seed: Seed of the random check inputs.
    :param deadline: Loop deadline the mean costs are compared with, in seconds.

    :return: The timing report.
    """

    if iterations < MIN_ITERATIONS:
        raise ValueError(f"At least {MIN_ITERATIONS} iterations are required.", iterations)

    env = secure.Envelope(setpoint=BENCH_SETPOINT, omega_n=BENCH_OMEGA_N, xi=BENCH_XI)
    lut = secure.lut_build(env, 1e-3, BENCH_HORIZON)
    rng = np.random.default_rng(seed)
    times = rng.uniform(0.0, BENCH_HORIZON, iterations).tolist()
    slips = rng.uniform(0.0, 1.0, iterations).tolist()

    def analytic(t: float, slip: float) -> bool:
        lo, hi = secure.envelope_bounds(env, t)
        return lo <= slip <= hi

    def tabulated(t: float, slip: float) -> bool:
        lo, hi = secure.lut_bounds(env, lut, t)
        return lo <= slip <= hi

    analytic_costs = _time_calls(analytic, times, slips)
    lut_costs = _time_calls(tabulated, times, slips)

    return BenchReport(
        iterations=iterations,
        analytic_mean=float(analytic_costs.mean()),
        analytic_p99=float(np.percentile(analytic_costs, 99)),
        lut_mean=float(lut_costs.mean()),
        lut_p99=float(np.percentile(lut_costs, 99)),
        deadline=deadline,
    )
