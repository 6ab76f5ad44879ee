"""Main application entry point."""

import logging
import sys

import click

from . import bench, commands, sim

LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log more (repeat for debug output).")
def cli(verbose: int):
    """Main CLI group."""

    level = LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command(help="Simulate a braking scenario.")
@click.argument("scenario_file", type=str)
@click.option("-o", "--output", help="Output CSV file.", type=str, default=None)
def run(scenario_file: str, output: str):
    """Simulate a braking scenario."""

    return commands.run_scenario(scenario_file, output)


@cli.command(help="Sweep a tampered parameter over a list of values.")
@click.argument("scenario_file", type=str)
@click.option("--axis", type=click.Choice(sorted(sim.SWEEP_AXES)), default=None, help="Tampered parameter.")
@click.option("--values", type=str, default=None, help="Comma-separated values.")
@click.option("-o", "--output", help="Output CSV file.", type=str, default=None)
@click.option("-j", "--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")
def sweep(scenario_file: str, axis: str, values: str, output: str, workers: int):
    """Sweep a tampered parameter over a list of values."""

    return commands.sweep_scenario(scenario_file, axis, values, output, workers)


@cli.command(help="Print loop margins and envelope parameters per speed bin.")
@click.argument("scenario_file", type=str)
@click.option("-s", "--speed", "speeds", type=float, multiple=True, help="Speed bin to report (repeatable).")
def margins(scenario_file: str, speeds: tuple[float, ...]):
    """Print loop margins and envelope parameters per speed bin."""

    return commands.report_margins(scenario_file, speeds)


@cli.command(help="Calibrate the plant-gain scalar against the scenario gains.")
@click.argument("scenario_file", type=str)
def calibrate(scenario_file: str):
    """Calibrate the plant-gain scalar against the scenario gains."""

    return commands.calibrate(scenario_file)


@cli.command("bench", help="Time the analytic and lookup-table semantic checks.")
@click.option("--iters", type=int, default=bench.MIN_ITERATIONS, help="Calls per check path.")
def benchmark(iters: int):
    """Time the analytic and lookup-table semantic checks."""

    return commands.run_bench(iters)


@cli.command("paper-tables", help="Reproduce the detection-time and stop-distance tables.")
@click.option("-s", "--scenario", "scenario_file", type=str, default=None, help="Base scenario file.")
@click.option("-o", "--output", default="tables", help="Output directory.")
@click.option("-j", "--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")
def paper_tables(scenario_file: str, output: str, workers: int):
    """Reproduce the detection-time and stop-distance tables."""

    return commands.reproduce_tables(scenario_file, output, workers)


cli.add_command(paper_tables, "tables")


@cli.command(help="Create a new example scenario file.")
@click.option("-o", "--output", default="scenario.toml", help="Output file name.")
def init(output: str):
    """Create a new example scenario file."""

    commands.initialise_sample_scenario(output)


def main() -> int:
    """Run the CLI and map its outcome to an exit status.

    0 on success, 1 on usage or configuration errors, 2 on aborted simulations.
    """

    try:
        status = cli.main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1

    return status if isinstance(status, int) else 0


if __name__ == "__main__":
    sys.exit(main())
