"""
Flight Stack - Dynamics Tests
"""

import math

import numpy as np
import pytest

from src.dynamics import (
    ControlCommand,
    QuadState,
    VehicleParams,
    action_to_command,
    advance,
    clamp_command,
    mechanical_energy,
    min_flight_time,
    quat_from_axis_angle,
    quat_from_yaw,
    quat_to_rotation,
    step,
    wrap_angle,
    yaw_of,
)
from src.utils import DynamicsError

PARAMS = VehicleParams()


def euler_integrate(state: QuadState, cmd: ControlCommand, dt: float, n: int, params: VehicleParams) -> np.ndarray:
    """Explicit Euler over n micro-steps of the same model, written out independently"""
    x = state.as_vector().copy()
    h = dt / n
    rate_cmd = np.asarray(cmd.body_rates, dtype=np.float64)
    for _ in range(n):
        v, q, w = x[3:6], x[6:10], x[10:13]
        accel = quat_to_rotation(q / np.linalg.norm(q))[:, 2] * cmd.thrust / params.mass - np.array([0, 0, params.gravity])
        q_dot = 0.5 * np.array([
            -q[1] * w[0] - q[2] * w[1] - q[3] * w[2],
            q[0] * w[0] + q[2] * w[2] - q[3] * w[1],
            q[0] * w[1] - q[1] * w[2] + q[3] * w[0],
            q[0] * w[2] + q[1] * w[1] - q[2] * w[0],
        ])
        w_dot = (rate_cmd - w) / params.rate_time_constant
        x = x + h * np.concatenate([v, accel, q_dot, w_dot])
    return x


def reference_state(state, cmd, dt, n=256):
    """Fine RK4 solution over dt"""
    for _ in range(n):
        state = step(state, cmd, dt / n, PARAMS)
    return state.as_vector()


def random_commands(rng, count=10):
    return [ControlCommand(thrust=float(rng.uniform(0.0, PARAMS.max_thrust)),
                           body_rates=rng.uniform(-PARAMS.max_body_rate, PARAMS.max_body_rate, size=3))
            for _ in range(count)]


def test_vehicle_thrust_to_weight_near_six():
    assert abs(PARAMS.thrust_to_weight - 6.0) / 6.0 < 0.1


def test_hover_is_equilibrium():
    state = QuadState.hover([1.0, 2.0, 3.0])
    nxt = step(state, ControlCommand(thrust=PARAMS.hover_thrust), 0.02, PARAMS)

    np.testing.assert_allclose(nxt.position, state.position, atol=1e-12)
    np.testing.assert_allclose(nxt.velocity, 0.0, atol=1e-12)
    assert nxt.time == pytest.approx(0.02)


def test_free_fall_velocity():
    state = QuadState.hover([0.0, 0.0, 10.0])
    nxt = step(state, ControlCommand(thrust=0.0), 0.02, PARAMS)

    assert nxt.velocity[2] == pytest.approx(-0.19620, abs=1e-12)
    assert nxt.position[2] == pytest.approx(10.0 - 0.5 * 9.81 * 0.02 ** 2, abs=1e-12)


def test_step_matches_fine_euler_oracle(rng):
    """Richardson-extrapolated Euler (2000 and 4000 micro-steps) as the reference"""
    state = QuadState(position=np.array([1.0, 2.0, 3.0]), velocity=np.array([0.5, -0.2, 0.1]),
                      orientation=quat_from_axis_angle([0.3, -0.2, 1.0], 0.4), body_rates=np.array([0.5, 0.0, -1.0]))
    for cmd in random_commands(rng, count=3):
        coarse = euler_integrate(state, cmd, 0.02, 2000, PARAMS)
        fine = euler_integrate(state, cmd, 0.02, 4000, PARAMS)
        oracle = 2.0 * fine - coarse
        rk4 = advance(state, cmd, PARAMS, control_dt=0.02, substep=0.005)
        np.testing.assert_allclose(rk4.position, oracle[0:3], atol=1e-7)


def test_rk4_local_error_order(rng):
    state = QuadState.hover([0.0, 0.0, 2.0], yaw=0.3)
    for cmd in random_commands(rng):
        errors = []
        for dt in (0.02, 0.01):
            one_step = step(state, cmd, dt, PARAMS).as_vector()
            errors.append(np.linalg.norm(one_step - reference_state(state, cmd, dt)))
        assert errors[0] / errors[1] >= 8.0


def test_energy_conserved_in_free_flight():
    state = QuadState(position=np.array([0.0, 0.0, 40.0]), velocity=np.array([1.0, -2.0, 3.0]),
                      orientation=quat_from_yaw(0.7), body_rates=np.zeros(3))
    cmd = ControlCommand(thrust=0.0)
    e0 = mechanical_energy(state, PARAMS)
    for _ in range(50):
        state = advance(state, cmd, PARAMS)

    assert state.time == pytest.approx(1.0)
    assert abs(mechanical_energy(state, PARAMS) - e0) / abs(e0) < 1e-6


def test_step_is_deterministic(rng):
    state = QuadState.hover([0.0, 1.0, 2.0], yaw=1.0)
    cmd = random_commands(rng, count=1)[0]
    a = step(state, cmd, 0.02, PARAMS).as_vector()
    b = step(state, cmd, 0.02, PARAMS).as_vector()
    assert np.array_equal(a, b)


def test_quaternion_stays_unit(rng):
    state = QuadState.hover([0.0, 0.0, 2.0])
    cmd = ControlCommand(thrust=10.0, body_rates=np.array([8.0, -6.0, 9.0]))
    for _ in range(100):
        state = advance(state, cmd, PARAMS)
    assert np.linalg.norm(state.orientation) == pytest.approx(1.0, abs=1e-12)


def test_clamp_command_bounds():
    low = clamp_command(ControlCommand(thrust=-1.0), PARAMS)
    high = clamp_command(ControlCommand(thrust=2 * PARAMS.max_thrust, body_rates=np.array([20.0, -20.0, 1.0])), PARAMS)

    assert low.thrust == 0.0
    assert high.thrust == PARAMS.max_thrust
    np.testing.assert_array_equal(high.body_rates, [10.0, -10.0, 1.0])
    assert clamp_command(high, PARAMS).thrust == high.thrust


def test_clamp_command_identity_in_range():
    cmd = ControlCommand(thrust=5.0, body_rates=np.array([0.1, -0.2, 0.3]))
    assert clamp_command(cmd, PARAMS) is cmd


def test_clamp_command_rejects_nan():
    with pytest.raises(DynamicsError):
        clamp_command(ControlCommand(thrust=float("nan")), PARAMS)


def test_step_rejects_bad_inputs():
    state = QuadState.hover([0.0, 0.0, 1.0])
    with pytest.raises(DynamicsError):
        step(state, ControlCommand(thrust=1.0), 0.0, PARAMS)

    broken = QuadState(position=np.array([np.inf, 0.0, 0.0]), velocity=np.zeros(3),
                       orientation=quat_from_yaw(0.0), body_rates=np.zeros(3))
    with pytest.raises(DynamicsError) as excinfo:
        step(broken, ControlCommand(thrust=1.0), 0.02, PARAMS)
    assert excinfo.value.field_name == "position"


def test_action_to_command_mapping():
    assert action_to_command(np.array([-1.0, 0, 0, 0]), PARAMS).thrust == 0.0
    assert action_to_command(np.zeros(4), PARAMS).thrust == pytest.approx(PARAMS.hover_thrust)
    assert action_to_command(np.ones(4), PARAMS).thrust == pytest.approx(PARAMS.max_thrust)

    capped = action_to_command(np.ones(4), PARAMS, action_scale=0.5)
    assert capped.thrust == pytest.approx(PARAMS.hover_thrust + 0.5 * (PARAMS.max_thrust - PARAMS.hover_thrust))
    np.testing.assert_allclose(capped.body_rates, 5.0)


def test_yaw_helpers():
    assert yaw_of(quat_from_yaw(1.2)) == pytest.approx(1.2)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    np.testing.assert_allclose(quat_to_rotation(quat_from_yaw(math.pi / 2)) @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                               atol=1e-12)


def test_min_flight_time_is_lower_bound():
    state = QuadState.hover([0.0, 0.0, 2.0])
    cmd = ControlCommand(thrust=PARAMS.max_thrust)
    for _ in range(25):
        state = advance(state, cmd, PARAMS)
    travelled = np.linalg.norm(state.position - [0.0, 0.0, 2.0])
    assert min_flight_time(travelled, PARAMS) <= state.time
