"""CLI command implementations."""

from pathlib import Path
from typing import Optional, Sequence

import click

from . import bench, lti, plant, scenario, secure, serialization, sim
from .attack import AttackKind, AttackSpec
from .exceptions import NoCrossoverError, SimulationAborted

DETECTION_SWEEP_VALUES = {
    "Kp": (18000.0, 18500.0, 19000.0, 19500.0, 20000.0),
    "Ki": (750000.0, 800000.0, 850000.0, 900000.0, 950000.0),
    "Kd": (1600.0, 1650.0, 1700.0, 1750.0, 1800.0),
    "setpoint": (0.1, 0.3, 0.5, 0.7, 0.9),
    "output": (-0.6, -0.2, 0.2, 0.6, 1.0),
}

SETPOINT_ATTACK_VALUES = (0.1, 0.5, 0.9)


def read_scenario(path: str) -> scenario.Scenario:
    """Load a scenario file, turning every failure into a CLI error.

    :param path: Scenario file path.
    """

    try:
        with open(path, "r", encoding="utf-8") as scenario_file:
            return scenario.load_scenario(scenario_file)
    except FileNotFoundError as exc:
        raise click.ClickException(f"scenario not found: {path}") from exc
    except OSError as exc:
        raise click.ClickException(str(exc)) from exc


def _default_output(path: str, suffix: str) -> str:
    return f"{Path(path).stem}{suffix}"


def _write_rows(path: str, rows: Sequence[sim.Row]):
    with open(path, "w", encoding="utf-8", newline="") as out_file:
        serialization.write_rows(out_file, rows)


def summarize(result: sim.ScenarioResult) -> str:
    """Plain-text summary of a run."""

    distance = sim.stop_distance(result)
    detected = sim.detection_time(result)
    lines = [
        f"Stop distance: {distance:.2f} m" + (" (incomplete)" if result.incomplete else ""),
        "Detection time: " + ("none" if detected is None else f"{detected:.3f} s"),
        f"Detections: {len(result.events)}",
    ]
    lines += [f"  {event.t:.3f} s {event.kind.value} (bin {event.speed_bin} m/s)" for event in result.events]
    lines.append(f"Recovery actions: {len(result.actions)}")
    lines += [
        f"  {action.t:.3f} s {action.policy.value}: {action.previous.value} -> {action.new.value}"
        for action in result.actions
    ]
    lines.append(f"Deadline misses: {result.deadline_misses}")

    return "\n".join(lines)


def run_scenario(path: str, output: Optional[str]) -> int:
    """Simulate a scenario, write its CSV log and print a summary.

    :param path: Scenario file path.
    :param output: CSV output path; defaults to the scenario name in the working directory.

    :return: 0 on a clean run, 2 on an aborted one.
    """

    config = read_scenario(path).to_config()
    output = output or _default_output(path, ".csv")

    try:
        result = sim.run_braking(config)
    except SimulationAborted as exc:
        if exc.partial is not None:
            _write_rows(output, exc.partial.rows)

        click.echo(f"Simulation aborted at row {exc.row_index}: {exc.args[0]}", err=True)
        return 2

    _write_rows(output, result.rows)
    click.echo(summarize(result))

    return 0


def parse_values(raw: str) -> list[float]:
    """Parse a comma-separated list of numbers."""

    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as exc:
        raise click.ClickException(f"Invalid sweep values: {raw}") from exc


def sweep_scenario(
    path: str, axis: Optional[str], values: Optional[str], output: Optional[str], workers: Optional[int]
) -> int:
    """Sweep a tampered parameter over a list of values.

    Axis and values default to the ``[sweep]`` section of the scenario.

    :param path: Scenario file path.
    :param axis: Tampered parameter.
    :param values: Comma-separated values.
    :param output: Sweep CSV path.
    :param workers: Worker processes.

    :return: 0 if at least one run succeeded, 2 otherwise.
    """

    document = read_scenario(path)
    preset = document.sweep

    if axis is None:
        if preset is None:
            raise click.ClickException("No sweep axis given and the scenario has no [sweep] section.")
        axis = preset.axis

    sweep_values = parse_values(values) if values is not None else list(preset.values if preset else ())

    if not sweep_values:
        raise click.ClickException("No sweep values.")

    rows = sim.sweep(document.to_config(), axis, sweep_values, workers)

    with open(output or _default_output(path, "-sweep.csv"), "w", encoding="utf-8", newline="") as out_file:
        serialization.write_sweep(out_file, rows)

    click.echo(serialization.render_sweep(rows))

    return 0 if any(row.error is None for row in rows) else 2


def report_margins(path: str, speeds: Optional[Sequence[float]]) -> int:
    """Print the loop margins and envelope parameters of each speed bin.

    :param path: Scenario file path.
    :param speeds: Speeds to report; defaults to every design bin.
    """

    document = read_scenario(path)
    speeds = list(speeds) if speeds else plant.speed_bins()
    rows = []
    grid = []

    for speed in speeds:
        try:
            entry = plant.margins_grid(document.plant, document.gains, [speed])[0]
        except NoCrossoverError:
            rows.append((f"{speed:g}", "no crossover", "-", "-", "-"))
            continue
        except ValueError as exc:
            raise click.ClickException(str(exc.args[0])) from exc

        grid.append(entry)
        margins = entry[1]
        xi = secure.xi_from_margin(margins.phi_m)
        rows.append(
            (
                f"{speed:g}",
                f"{margins.omega_c:.3f}",
                f"{margins.phi_m:.2f}",
                f"{xi:.3f}",
                f"{margins.omega_c * xi:.3f}",
            )
        )

    headers = ("v (m/s)", "omega_c (rad/s)", "phi_m (deg)", "xi", "omega_n*xi (1/s)")
    click.echo(serialization.render_table(headers, rows))

    if len(grid) > 1:
        click.echo(f"Crossover frequency vs speed: {plant.crossover_trend(grid)}")

    return 0


def calibrate(path: str) -> int:
    """Print the calibrated friction curve and plant-gain scalar for a scenario.

    :param path: Scenario file path.
    """

    document = read_scenario(path)
    curve = document.plant.friction

    try:
        scale = plant.calibrate_gain_scale(document.plant, document.gains)
    except ValueError as exc:
        raise click.ClickException(str(exc.args[0])) from exc

    calibrated = plant.PlantParams.model_validate({**document.plant.model_dump(), "gain_scale": scale})
    margins = lti.loop_margins(plant.loop_tf(plant.at_speed(calibrated, 30.0), document.gains))

    click.echo(f"friction: c1={curve.c1!r} c2={curve.c2!r} c3={curve.c3!r} (peak {plant.peak_slip(curve):.4f})")
    click.echo(f"mu1 at lambda_bar: {calibrated.mu1:.6f}")
    click.echo(f"gain_scale = {scale!r}")
    click.echo(f"phi_m at 30 m/s: {margins.phi_m:.2f} deg, omega_c: {margins.omega_c:.3f} rad/s")

    return 0


def run_bench(iterations: int) -> int:
    """Time the two semantic-check paths on this host.

    :param iterations: Calls per path.
    """

    try:
        report = bench.run_bench(iterations)
    except ValueError as exc:
        raise click.ClickException(str(exc.args[0])) from exc

    click.echo(
        serialization.render_table(
            ("Semantic check", "mean (us)", "p99 (us)"),
            [
                ("analytic", f"{report.analytic_mean * 1e6:.3f}", f"{report.analytic_p99 * 1e6:.3f}"),
                ("LUT", f"{report.lut_mean * 1e6:.3f}", f"{report.lut_p99 * 1e6:.3f}"),
            ],
        )
    )

    if not report.passed:
        raise click.ClickException("LUT check is not faster than the analytic check, or a check misses the deadline.")

    return 0


def stop_distance_rows(base: sim.SimConfig) -> list[tuple[str, str, str, str]]:
    """Stop distances of the setpoint attacks with the monitor off and on.

    :return: Rendered rows: scenario, non-secure distance, secured distance, secured increase.
    """

    nominal = sim.stop_distance(sim.run_braking(base.with_attacks().with_monitor(False)))
    rows = [("nominal", f"{nominal:.2f} m", f"{nominal:.2f} m", "-")]

    for value in SETPOINT_ATTACK_VALUES:
        attacked = base.with_attacks(AttackSpec(kind=AttackKind.SETPOINT, value=value))
        unsecured = sim.stop_distance(sim.run_braking(attacked.with_monitor(False)))
        secured = sim.stop_distance(sim.run_braking(attacked.with_monitor(True)))
        rows.append(
            (
                f"setpoint {value:g}",
                f"{unsecured:.2f} m (+{unsecured - nominal:.2f})",
                f"{secured:.2f} m (+{secured - nominal:.2f})",
                f"{(secured - nominal) / nominal:.2%}",
            )
        )

    return rows


def reproduce_tables(path: Optional[str], output_dir: str, workers: Optional[int]) -> int:
    """Reproduce the detection-time and stop-distance tables.

    :param path: Optional base scenario; defaults to the built-in configuration.
    :param output_dir: Directory receiving one sweep CSV per axis.
    :param workers: Worker processes for the sweeps.
    """

    base = read_scenario(path).to_config() if path else sim.SimConfig()
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    succeeded = False

    for axis, values in DETECTION_SWEEP_VALUES.items():
        rows = sim.sweep(base.with_monitor(True), axis, values, workers)
        succeeded = succeeded or any(row.error is None for row in rows)

        with open(out_dir / f"detection-{axis}.csv", "w", encoding="utf-8", newline="") as out_file:
            serialization.write_sweep(out_file, rows)

        click.echo(serialization.render_sweep(rows))
        click.echo()

    try:
        distances = stop_distance_rows(base)
    except SimulationAborted as exc:
        click.echo(f"Stop-distance comparison aborted: {exc.args[0]}", err=True)
        return 2

    click.echo(serialization.render_table(("Scenario", "Non-secure", "Secure", "Secure increase"), distances))

    return 0 if succeeded else 2


def initialise_sample_scenario(path: str):
    """Create a new example scenario file.

    :param path: Path to the output file.
    """

    with open(path, "w", encoding="utf-8") as outf:
        scenario.store_scenario(outf, scenario.create_sample_scenario())
