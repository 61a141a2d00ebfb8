"""
Flight Stack - Quadrotor Dynamics
Rigid-body motion under collective-thrust + body-rate commands, integrated with RK4

Model:
    p_dot = v
    v_dot = R(q) @ [0, 0, c/m] + [0, 0, -g] + f_ext/m
    q_dot = 0.5 * q ⊗ (0, ω)
    ω_dot = (ω_cmd - ω) / τ_ω

Quaternions are (w, x, y, z) and rotate body vectors into the world frame.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .utils import DynamicsError, require_finite

CONTROL_DT = 0.02
SUBSTEP = 0.005


@dataclass(frozen=True)
class VehicleParams:
    """Physical limits and time constants of the desk-scale racing quad"""
    mass: float = 0.54
    gravity: float = 9.81
    max_thrust: float = 34.0
    max_body_rate: float = 10.0
    rate_time_constant: float = 0.05
    collision_radius: float = 0.2

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity

    @property
    def thrust_to_weight(self) -> float:
        return self.max_thrust / self.hover_thrust

    @classmethod
    def from_config(cls, vehicle_config) -> "VehicleParams":
        return cls(
            mass=vehicle_config.mass,
            gravity=vehicle_config.gravity,
            max_thrust=vehicle_config.max_thrust,
            max_body_rate=vehicle_config.max_body_rate,
            rate_time_constant=vehicle_config.rate_time_constant,
            collision_radius=vehicle_config.collision_radius,
        )


@dataclass(frozen=True)
class QuadState:
    """Full rigid-body state; arrays are float64 and treated as immutable"""
    position: np.ndarray
    velocity: np.ndarray
    orientation: np.ndarray
    body_rates: np.ndarray
    time: float = 0.0

    @classmethod
    def hover(cls, position: Sequence[float], yaw: float = 0.0, time: float = 0.0) -> "QuadState":
        return cls(
            position=np.asarray(position, dtype=np.float64).copy(),
            velocity=np.zeros(3),
            orientation=quat_from_yaw(yaw),
            body_rates=np.zeros(3),
            time=float(time),
        )

    def as_vector(self) -> np.ndarray:
        """[p(3), v(3), q(4), ω(3)]"""
        return np.concatenate([self.position, self.velocity, self.orientation, self.body_rates])

    @classmethod
    def from_vector(cls, x: np.ndarray, time: float) -> "QuadState":
        return cls(position=x[0:3].copy(), velocity=x[3:6].copy(), orientation=x[6:10].copy(),
                   body_rates=x[10:13].copy(), time=float(time))


@dataclass(frozen=True)
class ControlCommand:
    """Collective thrust [N] and body-rate setpoint [rad/s]"""
    thrust: float
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.thrust], self.body_rates])


# ---------------------------------------------------------------------------
# Quaternion helpers
# ---------------------------------------------------------------------------

def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix R(q) mapping body-frame vectors to the world frame"""
    w, x, y, z = q
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def quat_from_yaw(yaw: float) -> np.ndarray:
    half = 0.5 * yaw
    return np.array([math.cos(half), 0.0, 0.0, math.sin(half)])


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def yaw_of(q: np.ndarray) -> float:
    """Heading of the body x-axis projected onto the horizontal plane"""
    w, x, y, z = q
    return math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z))


def wrap_angle(angle: float) -> float:
    """Wrap to [-pi, pi]"""
    return math.atan2(math.sin(angle), math.cos(angle))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def clamp_command(cmd: ControlCommand, params: VehicleParams) -> ControlCommand:
    """
    Project a command into its admissible box

    In-range commands are returned unchanged bit-for-bit.

    Raises:
        DynamicsError: If the command contains NaN
    """
    require_finite("thrust", cmd.thrust)
    require_finite("body_rates", cmd.body_rates)

    rates = np.asarray(cmd.body_rates, dtype=np.float64)
    thrust = min(max(float(cmd.thrust), 0.0), params.max_thrust)
    limit = params.max_body_rate
    if np.all(np.abs(rates) <= limit) and thrust == cmd.thrust:
        return cmd
    return ControlCommand(thrust=thrust, body_rates=np.clip(rates, -limit, limit))


def action_to_command(action: np.ndarray, params: VehicleParams, action_scale: float = 1.0) -> ControlCommand:
    """
    Map a normalized action in [-1, 1]^4 to a clamped ControlCommand

    a0 = -1 is zero thrust, a0 = 0 is hover, a0 = +1 is hover plus
    action_scale times the remaining thrust authority. Body rates scale
    linearly with action_scale.
    """
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    hover = params.hover_thrust
    if a[0] < 0.0:
        thrust = hover * (1.0 + a[0])
    else:
        thrust = hover + a[0] * action_scale * (params.max_thrust - hover)
    rates = a[1:4] * params.max_body_rate * action_scale
    return clamp_command(ControlCommand(thrust=thrust, body_rates=rates), params)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def _derivative(x: np.ndarray, thrust: float, rate_cmd: np.ndarray, params: VehicleParams,
                force: np.ndarray) -> np.ndarray:
    v = x[3:6]
    q = x[6:10]
    omega = x[10:13]

    accel = quat_to_rotation(q)[:, 2] * (thrust / params.mass) + force / params.mass
    accel[2] -= params.gravity
    q_dot = 0.5 * quat_multiply(q, np.array([0.0, omega[0], omega[1], omega[2]]))
    omega_dot = (rate_cmd - omega) / params.rate_time_constant

    return np.concatenate([v, accel, q_dot, omega_dot])


def _validate_state(state: QuadState) -> None:
    require_finite("position", state.position)
    require_finite("velocity", state.velocity)
    require_finite("orientation", state.orientation)
    require_finite("body_rates", state.body_rates)
    require_finite("time", state.time)


def step(state: QuadState, cmd: ControlCommand, dt: float, params: VehicleParams,
         disturbance: Optional[np.ndarray] = None) -> QuadState:
    """
    Advance the state by one classical RK4 step of length dt

    Args:
        state: Current state (unit quaternion)
        cmd: Command, clamped to the vehicle limits before use
        dt: Step length in seconds, > 0
        params: Vehicle parameters
        disturbance: Optional constant world-frame force [N] over the step

    Returns:
        New state with renormalized quaternion and time advanced by dt

    Raises:
        DynamicsError: On non-finite inputs or non-positive dt
    """
    _validate_state(state)
    require_finite("dt", dt)
    if dt <= 0.0:
        raise DynamicsError(f"Integration step must be positive, got {dt}", field_name="dt", field_value=dt)

    cmd = clamp_command(cmd, params)
    force = np.zeros(3) if disturbance is None else np.asarray(disturbance, dtype=np.float64)
    require_finite("disturbance", force)

    rates = np.asarray(cmd.body_rates, dtype=np.float64)
    x = state.as_vector()
    k1 = _derivative(x, cmd.thrust, rates, params, force)
    k2 = _derivative(x + 0.5 * dt * k1, cmd.thrust, rates, params, force)
    k3 = _derivative(x + 0.5 * dt * k2, cmd.thrust, rates, params, force)
    k4 = _derivative(x + dt * k3, cmd.thrust, rates, params, force)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    x_next[6:10] = quat_normalize(x_next[6:10])

    return QuadState.from_vector(x_next, state.time + dt)


def advance(state: QuadState, cmd: ControlCommand, params: VehicleParams,
            control_dt: float = CONTROL_DT, substep: float = SUBSTEP,
            disturbance: Optional[np.ndarray] = None) -> QuadState:
    """
    Hold a command for one control period, integrating in RK4 substeps

    The final substep is shortened so the period is covered exactly.
    """
    n_full = int(math.floor(control_dt / substep + 1e-9))
    remainder = control_dt - n_full * substep
    start_time = state.time
    for _ in range(n_full):
        state = step(state, cmd, substep, params, disturbance)
    if remainder > 1e-12:
        state = step(state, cmd, remainder, params, disturbance)
    # Keep the clock on the control grid despite summation round-off
    return QuadState(state.position, state.velocity, state.orientation, state.body_rates,
                     start_time + control_dt)


def mechanical_energy(state: QuadState, params: VehicleParams) -> float:
    """Kinetic plus potential energy [J]"""
    v = state.velocity
    return 0.5 * params.mass * float(v @ v) + params.mass * params.gravity * float(state.position[2])


def min_flight_time(distance: float, params: VehicleParams) -> float:
    """
    Lower bound on the time to cover a straight-line distance from rest

    Acceleration magnitude never exceeds c_max/m + g, so d <= a_max t^2 / 2.
    """
    a_max = params.max_thrust / params.mass + params.gravity
    return math.sqrt(2.0 * max(distance, 0.0) / a_max)
