import io
import math

import pydantic
import pytest

from cyfence import controller, secure, serialization, sim
from cyfence.attack import AttackKind, AttackSpec
from cyfence.controller import PidState
from cyfence.exceptions import SimulationAborted
from cyfence.secure import ControllerId, DetectionKind

GAIN_AXES = {
    "Kp": (18000.0, 18500.0, 19000.0, 19500.0, 20000.0),
    "Ki": (750000.0, 800000.0, 850000.0, 900000.0, 950000.0),
    "Kd": (1600.0, 1650.0, 1700.0, 1750.0, 1800.0),
}
SETPOINTS = (0.1, 0.3, 0.5, 0.7, 0.9)


def attacked(base_config, kind, value, **window):
    return base_config.with_attacks(AttackSpec(kind=kind, value=value, **window))


def test_nominal_no_false_positives(nominal_result):
    assert nominal_result.events == []
    assert nominal_result.actions == []
    assert nominal_result.deadline_misses == 0
    assert not nominal_result.incomplete
    assert all(row.active_controller is ControllerId.PRIMARY for row in nominal_result.rows)


def trajectory(result):
    return [(row.t, row.v, row.omega, row.slip, row.u_commanded, row.u_applied) for row in result.rows]


def test_nominal_monitor_does_not_change_trajectory(nominal_result, nominal_unmonitored_result):
    assert trajectory(nominal_result) == trajectory(nominal_unmonitored_result)
    assert [(row.bound_lo, row.bound_hi) for row in nominal_result.rows] == [
        (row.bound_lo, row.bound_hi) for row in nominal_unmonitored_result.rows
    ]


def test_primary_engages_at_equilibrium(nominal_result, base_config):
    store = secure.build_cdal(base_config.plant, base_config.gains, base_config.monitor, base_config.max_t)
    gains = controller.in_command_units(base_config.gains, base_config.plant.gain_scale)
    engaged = controller.reset(PidState(), integral=store.equilibrium_command)

    error = gains.setpoint - nominal_result.rows[0].slip

    assert nominal_result.rows[0].u_commanded == controller.pid_step(engaged, gains, error, base_config.dt)
    assert nominal_result.rows[0].u_commanded > store.equilibrium_command


def test_nominal_stays_inside_decayed_envelope(nominal_result):
    late = [row for row in nominal_result.rows if row.t >= 2.0]

    assert late
    assert all(row.bound_hi - row.bound_lo == pytest.approx(2 * secure.ENVELOPE_MIN_HALF_WIDTH) for row in late)
    assert all(row.bound_lo <= row.slip <= row.bound_hi for row in late)


def test_nominal_tracks_setpoint(nominal_result):
    settled = [row.slip for row in nominal_result.rows if 1.0 <= row.t <= 2.5]

    assert settled
    assert all(abs(slip - 0.12) <= 0.01 for slip in settled)


def test_nominal_manoeuvre(nominal_result, base_config):
    rows = nominal_result.rows

    assert rows[0].t == 0.0
    assert rows[0].v == base_config.v0
    assert rows[-1].v > base_config.v_stop
    assert all(0.0 <= row.slip <= 1.0 for row in rows)
    assert all(later.v <= earlier.v for earlier, later in zip(rows, rows[1:]))
    assert 0.0 < nominal_result.stop_distance < 200.0


def test_rows_log_commands(nominal_result):
    assert all(row.u_commanded == row.u_applied for row in nominal_result.rows)
    assert all(row.bound_lo <= 0.12 <= row.bound_hi for row in nominal_result.rows)
    assert all(row.elapsed_budget == pytest.approx(502e-6) for row in nominal_result.rows)


def test_setpoint_attack_unsecured_lengthens_stop(base_config, nominal_unmonitored_result, setpoint09_config):
    unsecured = sim.run_braking(setpoint09_config.with_monitor(False))

    assert unsecured.events == []
    assert unsecured.stop_distance >= 1.1 * nominal_unmonitored_result.stop_distance


def test_setpoint_attack_recovery(nominal_result, setpoint09_config):
    nominal = nominal_result.stop_distance
    unsecured = sim.run_braking(setpoint09_config.with_monitor(False)).stop_distance
    secured = sim.run_braking(setpoint09_config)

    assert secured.events[0].kind is DetectionKind.SEMANTIC
    assert secured.actions[0].new is ControllerId.BACKUP
    assert secured.stop_distance - nominal <= 0.2 * (unsecured - nominal)
    assert (secured.stop_distance - nominal) / nominal < 0.1


def test_moderate_setpoint_attack_recovery(base_config, nominal_result):
    secured = sim.run_braking(attacked(base_config, AttackKind.SETPOINT, 0.5))

    assert secured.events
    assert (secured.stop_distance - nominal_result.stop_distance) / nominal_result.stop_distance < 0.1


def test_backup_takes_over_after_detection(setpoint09_config):
    result = sim.run_braking(setpoint09_config)
    switch = result.actions[0].t

    assert all(row.active_controller is ControllerId.PRIMARY for row in result.rows if row.t <= switch)
    assert all(row.active_controller is ControllerId.BACKUP for row in result.rows if row.t > switch)
    assert len(result.actions) == 1


def test_safe_stop_policy(setpoint09_config):
    cfg = setpoint09_config.model_copy(
        update={"monitor": setpoint09_config.monitor.model_copy(update={"policy": secure.RecoveryPolicy.SAFE_STOP})}
    )

    result = sim.run_braking(cfg)

    assert result.actions[0].new is ControllerId.SAFE_STOP
    assert result.rows[-1].active_controller is ControllerId.SAFE_STOP


def test_output_override_detected(base_config):
    result = sim.run_braking(attacked(base_config, AttackKind.OUTPUT_OVERRIDE, 1.0))

    assert result.detection_time is not None
    assert result.detection_time < 1.0
    assert result.rows[0].u_applied == pytest.approx(base_config.gains.u_max / base_config.plant.gain_scale)


def test_tampering_leaves_logged_bounds_alone(base_config):
    cfg = attacked(base_config, AttackKind.PARAM_KP, 20000.0).with_monitor(False)
    store = secure.build_cdal(cfg.plant, cfg.gains, cfg.monitor, cfg.max_t)

    result = sim.run_braking(cfg)

    for row in result.rows:
        assert (row.bound_lo, row.bound_hi) == secure.envelope_bounds(
            store.envelopes[secure.speed_bin(row.v)], row.t, min_width=secure.ENVELOPE_MIN_HALF_WIDTH
        )


def test_deadline_delay_detected_on_first_iteration(base_config):
    result = sim.run_braking(attacked(base_config, AttackKind.DEADLINE_DELAY, 0.006, t_start=0.1))
    deadline_events = [event for event in result.events if event.kind is DetectionKind.DEADLINE]

    assert len(deadline_events) == 1
    assert deadline_events[0].t == pytest.approx(0.1)
    assert deadline_events[0].measured == pytest.approx(0.006502)
    assert result.deadline_misses == 1
    assert result.actions[0].new is ControllerId.BACKUP


def test_deadline_delay_within_budget(base_config):
    result = sim.run_braking(attacked(base_config, AttackKind.DEADLINE_DELAY, 0.004, t_start=0.1))

    assert result.events == []
    assert result.deadline_misses == 0


SUB_THRESHOLD = [
    AttackSpec(kind=AttackKind.PARAM_KP, value=3300.0),
    AttackSpec(kind=AttackKind.PARAM_KI, value=42000.0),
    AttackSpec(kind=AttackKind.PARAM_KD, value=32.0),
    AttackSpec(kind=AttackKind.SETPOINT, value=0.13, t_start=0.5, t_end=0.51),
    AttackSpec(kind=AttackKind.OUTPUT_OVERRIDE, value=0.3, t_start=0.5, t_end=0.51),
    AttackSpec(kind=AttackKind.DEADLINE_DELAY, value=0.004),
]


@pytest.mark.parametrize("spec", SUB_THRESHOLD, ids=lambda spec: spec.kind.value)
def test_sub_threshold_attack_not_detected(base_config, nominal_result, spec):
    result = sim.run_braking(base_config.with_attacks(spec))

    assert result.events == []
    assert result.actions == []
    assert not result.incomplete
    assert result.final[1] <= base_config.v_stop
    assert result.stop_distance == pytest.approx(nominal_result.stop_distance, rel=0.01)


def test_sub_threshold_attacks_cover_every_kind():
    assert {spec.kind for spec in SUB_THRESHOLD} == set(AttackKind)


@pytest.mark.parametrize(
    "kind, value",
    [
        (AttackKind.SETPOINT, 0.9),
        (AttackKind.SETPOINT, 0.1),
        (AttackKind.PARAM_KP, 20000.0),
        (AttackKind.PARAM_KI, 950000.0),
        (AttackKind.PARAM_KD, 1800.0),
        (AttackKind.OUTPUT_OVERRIDE, 1.0),
    ],
)
def test_semantic_events_match_logged_bounds(base_config, kind, value):
    result = sim.run_braking(attacked(base_config, kind, value))
    semantic = [event.t for event in result.events if event.kind is DetectionKind.SEMANTIC]
    outside = [row.t for row in result.rows if not row.bound_lo <= row.slip <= row.bound_hi]

    assert semantic
    assert semantic[0] == outside[0]

    for earlier, later in zip(semantic, semantic[1:]):
        assert later == min(t for t in outside if t > earlier)


def test_backup_never_commands_negative_torque(setpoint09_config):
    result = sim.run_braking(setpoint09_config)
    backup = [row for row in result.rows if row.active_controller is ControllerId.BACKUP]

    assert backup
    assert min(row.u_applied for row in backup) >= 0.0


def test_lut_monitor_no_false_positives(base_config):
    cfg = base_config.model_copy(update={"monitor": base_config.monitor.model_copy(update={"lut_enabled": True})})

    result = sim.run_braking(cfg)

    assert result.events == []
    assert all(row.elapsed_budget == pytest.approx(27e-6) for row in result.rows)


def test_lut_monitor_detects(setpoint09_config):
    cfg = setpoint09_config.model_copy(
        update={"monitor": setpoint09_config.monitor.model_copy(update={"lut_enabled": True})}
    )

    analytic = sim.run_braking(setpoint09_config).detection_time

    assert sim.run_braking(cfg).detection_time == pytest.approx(analytic, abs=0.01)


@pytest.mark.parametrize("axis", GAIN_AXES)
def test_gain_sweep_detection_times(base_config, axis):
    rows = sim.sweep(base_config, axis, GAIN_AXES[axis], workers=1)
    times = [row.detection_time for row in rows]

    assert all(t is not None and t < 2.0 for t in times)
    assert all(later < earlier for earlier, later in zip(times, times[1:]))


def test_setpoint_sweep_detection_times(base_config):
    rows = sim.sweep(base_config, "setpoint", SETPOINTS, workers=1)
    times = [row.detection_time for row in rows]

    assert [row.value for row in rows] == list(SETPOINTS)
    assert all(t is not None and t < 2.0 for t in times)
    assert all(later < earlier for earlier, later in zip(times, times[1:]))
    assert times[0] >= 3 * times[-1]


def test_sweep_parallel_matches_inline(base_config):
    values = (0.9, 0.1, 0.5)

    assert sim.sweep(base_config, "setpoint", values, workers=2) == sim.sweep(
        base_config, "setpoint", values, workers=1
    )


def test_sweep_empty(base_config):
    assert sim.sweep(base_config, "Kp", []) == []


def test_sweep_invalid_axis(base_config):
    with pytest.raises(ValueError):
        sim.sweep(base_config, "Tf", [0.1])


def test_sweep_keeps_attack_start(base_config):
    base = attacked(base_config, AttackKind.SETPOINT, 0.5, t_start=0.3)

    cfg = sim.sweep_config(base, "Kd", 1700.0)

    assert cfg.attacks == (AttackSpec(kind=AttackKind.PARAM_KD, value=1700.0, t_start=0.3),)


def test_sweep_point_failure_is_reported(base_config, monkeypatch):
    def abort(cfg):
        raise SimulationAborted("Non-finite simulation state.", 3)

    monkeypatch.setattr(sim, "run_braking", abort)

    [row] = sim.sweep(base_config, "Kp", [20000.0], workers=1)

    assert row.error == "Non-finite simulation state."
    assert row.detection_time is None


def test_deterministic_csv(setpoint09_config):
    def render():
        out = io.StringIO()
        serialization.write_rows(out, sim.run_braking(setpoint09_config).rows)
        return out.getvalue()

    assert render() == render()


def test_aborted_on_non_finite_state(base_config, monkeypatch):
    monkeypatch.setattr(sim, "_wheel_step", lambda p, state, torque, dt: (math.nan, math.nan))

    with pytest.raises(SimulationAborted) as exc_info:
        sim.run_braking(base_config)

    assert exc_info.value.row_index == 0
    assert len(exc_info.value.partial.rows) == 1


def test_safety_horizon(base_config):
    result = sim.run_braking(base_config.model_copy(update={"max_t": 0.5}))

    assert result.incomplete
    assert result.rows[-1].t < 0.5
    assert result.stop_distance > 0.0


def test_halving_period_converges(base_config):
    coarse = sim.run_braking(base_config.with_monitor(False)).stop_distance
    fine = sim.run_braking(base_config.model_copy(update={"dt": 0.0025}).with_monitor(False)).stop_distance

    assert fine == pytest.approx(coarse, rel=0.005)


def test_stop_distance_constant_speed():
    result = sim.ScenarioResult(
        rows=[sim.Row(k * 0.005, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ControllerId.PRIMARY, "", 0.0) for k in range(401)]
    )

    assert sim.stop_distance(result) == pytest.approx(20.0, rel=1e-12)


def test_stop_distance_includes_final_step():
    result = sim.ScenarioResult(
        rows=[sim.Row(k * 0.005, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ControllerId.PRIMARY, "", 0.0) for k in range(401)],
        final=(2.005, 9.0),
    )

    assert sim.stop_distance(result) == pytest.approx(20.0 + 0.005 * 9.5, rel=1e-12)


def test_run_ends_below_cut_off(nominal_result, base_config):
    t, v = nominal_result.final

    assert v <= base_config.v_stop < nominal_result.rows[-1].v
    assert t == pytest.approx(nominal_result.rows[-1].t + base_config.dt)


def test_detection_time_relative(base_config):
    result = sim.run_braking(attacked(base_config, AttackKind.SETPOINT, 0.9, t_start=0.5))

    assert result.attack_start == 0.5
    assert sim.detection_time(result, relative=True) == pytest.approx(sim.detection_time(result) - 0.5)
    assert sim.detection_time(result) >= 0.5


def test_detection_time_none(nominal_result):
    assert sim.detection_time(nominal_result) is None


@pytest.mark.parametrize(
    "fields",
    [
        {"dt": 0.0},
        {"v0": 5.0},
        {"v_stop": 4.0},
        {"step": 0.01},
        {
            "attacks": [
                {"kind": "setpoint", "value": 0.5},
                {"kind": "param_kp", "value": 1.0},
            ]
        },
    ],
)
def test_config_invalid(fields):
    with pytest.raises(pydantic.ValidationError):
        sim.SimConfig.model_validate(fields)


def test_config_multi_attack():
    cfg = sim.SimConfig.model_validate(
        {"multi_attack": True, "attacks": [{"kind": "setpoint", "value": 0.5}, {"kind": "param_kp", "value": 1.0}]}
    )

    assert len(cfg.attacks) == 2
    assert cfg.attack.kind is AttackKind.SETPOINT
