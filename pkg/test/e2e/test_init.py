"""Tests for the `init` command."""

from subprocess import check_call, run

import toml


def test_init_w_output(cyfence_invoke_cmdline, tmp_path):
    """Test a TOML scenario is created."""

    output_file = tmp_path / "sample.toml"

    check_call(cyfence_invoke_cmdline + ("init", "-o", str(output_file)))

    with open(output_file, "r", encoding="utf-8") as f:
        assert toml.load(f)["attack"]["kind"] == "setpoint"


def test_init_output_runs(cyfence_invoke_cmdline, tmp_path):
    """Test the sample scenario is accepted by `run`."""

    scenario_file = tmp_path / "sample.toml"
    check_call(cyfence_invoke_cmdline + ("init", "-o", str(scenario_file)))

    completed = run(
        cyfence_invoke_cmdline + ("run", str(scenario_file), "-o", str(tmp_path / "sample.csv")),
        capture_output=True,
        text=True,
        check=False,
    )

    assert completed.returncode == 0
    assert "semantic" in completed.stdout
