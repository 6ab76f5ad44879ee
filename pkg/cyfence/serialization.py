"""Result serialization.

Per-iteration CSV logs, sweep tables and plain-text reports.
"""

import csv
from typing import Iterable, Optional, Sequence, TextIO

from .sim import Row, SweepRow

CSV_HEADER = (
    "t",
    "v",
    "omega",
    "lambda",
    "bound_lo",
    "bound_hi",
    "u_commanded",
    "u_applied",
    "active_controller",
    "detected_kind",
    "elapsed_budget",
)

SWEEP_HEADER = ("axis", "value", "detection_time_s", "stop_distance_m", "status")


def format_number(value: Optional[float]) -> str:
    """Render a number with 9 significant digits; None renders empty."""

    return "" if value is None else f"{value:.9g}"


def row_fields(row: Row) -> list[str]:
    """CSV fields of a logged iteration, in header order."""

    return [
        *(format_number(x) for x in (row.t, row.v, row.omega, row.slip, row.bound_lo, row.bound_hi)),
        format_number(row.u_commanded),
        format_number(row.u_applied),
        row.active_controller.value,
        row.detected_kind,
        format_number(row.elapsed_budget),
    ]


def write_rows(out_file: TextIO, rows: Iterable[Row]):
    """Write the per-iteration log of a run.

    :param out_file: The output file, opened with ``newline=""``.
    :param rows: The logged iterations.
    """

    writer = csv.writer(out_file, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(row_fields(row) for row in rows)


def sweep_status(row: SweepRow) -> str:
    """``ok``, ``incomplete`` or ``error: <reason>``."""

    if row.error is not None:
        return f"error: {row.error}"

    return "incomplete" if row.incomplete else "ok"


def write_sweep(out_file: TextIO, rows: Iterable[SweepRow]):
    """Write a sweep table.

    :param out_file: The output file, opened with ``newline=""``.
    :param rows: Sweep rows, in sweep order.
    """

    writer = csv.writer(out_file, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)

    for row in rows:
        writer.writerow(
            [
                row.axis,
                format_number(row.value),
                format_number(row.detection_time),
                format_number(row.stop_distance),
                sweep_status(row),
            ]
        )


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Render a left-aligned plain-text table."""

    widths = [max(len(str(cell)) for cell in column) for column in zip(headers, *rows)]

    def line(cells: Sequence[str]) -> str:
        return "  ".join(str(cell).ljust(width) for cell, width in zip(cells, widths)).rstrip()

    return "\n".join([line(headers), line(["-" * width for width in widths]), *(line(row) for row in rows)])


def render_sweep(rows: Sequence[SweepRow]) -> str:
    """Detection-time table of a sweep."""

    return render_table(
        ("Tampered", "Value", "Detection time", "Stop distance"),
        [
            (
                row.axis,
                f"{row.value:g}",
                "-" if row.detection_time is None else f"{row.detection_time:.3f} s",
                "-" if row.stop_distance is None else f"{row.stop_distance:.2f} m",
            )
            for row in rows
        ],
    )
