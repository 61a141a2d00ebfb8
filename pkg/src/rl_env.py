"""
Flight Stack - Flight Environment
Teacher/student observations, the perception-aware stage reward and episode termination

Teacher observation layout (24 values, f32):
    [0:3]   world-frame velocity v
    [3:12]  rotation matrix R(q), row-major
    [12:15] body rates ω
    [15:18] next waypoint relative to p, body frame
    [18:21] lookahead point γ relative to p, body frame
    [21:24] projection point on the path relative to p, body frame
Relative vectors are clipped componentwise to ±observation_clip.

Student observation layout (embedding_dim + 12 values, f32):
    [z / max(‖z‖, ε) ; v ; R(q) row-major]
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .dynamics import (
    ControlCommand,
    QuadState,
    VehicleParams,
    action_to_command,
    advance,
    quat_to_rotation,
    wrap_angle,
    yaw_of,
)
from .planner import GuidingPath, lookahead_point, path_progress
from .utils import ConfigurationError, GeometryError, RetryableError, get_logger, retry_attempts
from .world import World, in_bounds, is_collision

TEACHER_OBS_DIM = 24
STUDENT_STATE_DIM = 12
ACTION_DIM = 4
EMBEDDING_EPS = 1e-8
MAX_START_ATTEMPTS = 100

REASONS = ("goal", "collision", "out-of-bounds", "timeout")
COMPONENTS = ("progress", "reached", "waypoint", "collision", "omega", "perception")

logger = get_logger("rl_env")


@dataclass(frozen=True)
class RewardWeights:
    k_p: float = 10.0
    k_s: float = 1.0
    k_wp: float = 5.0
    r_t: float = -20.0
    k_omega: float = -0.01
    k_pa: float = 0.5

    def __post_init__(self):
        if not self.r_t < 0:
            raise ConfigurationError(f"Collision penalty r_t must be negative, got {self.r_t}", config_key="reward.r_t")
        if self.k_omega > 0:
            raise ConfigurationError(f"k_omega must be <= 0, got {self.k_omega}", config_key="reward.k_omega")
        for key in ("k_p", "k_s", "k_wp", "k_pa"):
            if getattr(self, key) < 0:
                raise ConfigurationError(f"{key} must be >= 0", config_key=f"reward.{key}")

    @classmethod
    def from_config(cls, reward_config) -> "RewardWeights":
        return cls(k_p=reward_config.k_p, k_s=reward_config.k_s, k_wp=reward_config.k_wp,
                   r_t=reward_config.r_t, k_omega=reward_config.k_omega, k_pa=reward_config.k_pa)


@dataclass(frozen=True)
class EnvSettings:
    """Everything an episode needs besides the World and GuidingPath"""
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    weights: RewardWeights = field(default_factory=RewardWeights)
    max_steps: int = 500
    control_dt: float = 0.02
    substep: float = 0.005
    lookahead_step: float = 0.1
    hysteresis: float = 0.5
    progress_window: float = 3.0
    observation_clip: float = 10.0
    action_scale: float = 1.0

    @classmethod
    def from_config(cls, config, action_scale: float = 1.0, weights: Optional[RewardWeights] = None) -> "EnvSettings":
        return cls(
            vehicle=VehicleParams.from_config(config.vehicle),
            weights=weights or RewardWeights.from_config(config.reward),
            max_steps=config.simulation.max_steps,
            control_dt=config.simulation.control_dt,
            substep=config.simulation.substep,
            lookahead_step=config.planner.lookahead_step,
            hysteresis=config.planner.hysteresis,
            progress_window=config.planner.progress_window,
            observation_clip=config.planner.observation_clip,
            action_scale=action_scale,
        )


@dataclass(frozen=True, eq=False)
class EpisodeState:
    """Immutable snapshot of one episode; a new one is produced every control step"""
    quad: QuadState
    progress: float
    max_progress: float
    waypoints_passed: int = 0
    steps: int = 0
    done: bool = False
    reason: Optional[str] = None
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(3))
    s_gamma: float = 0.0
    projection_point: np.ndarray = field(default_factory=lambda: np.zeros(3))


# ---------------------------------------------------------------------------
# Episode bookkeeping
# ---------------------------------------------------------------------------

def _count_passed(world: World, p: np.ndarray, already: int) -> int:
    passed = already
    while passed < len(world.waypoints) and \
            np.linalg.norm(p - np.array(world.waypoints[passed])) <= world.goal_tolerance:
        passed += 1
    return passed


def make_episode_state(quad: QuadState, world: World, path: GuidingPath, settings: EnvSettings,
                       previous: Optional[EpisodeState] = None) -> EpisodeState:
    """Derive progress, lookahead and waypoint count for a new quad state (termination not applied)"""
    p = quad.position
    if previous is None:
        progress = path_progress(path, p)
        max_progress = progress
        passed = _count_passed(world, p, 0)
        steps = 0
    else:
        progress = path_progress(path, p, previous=previous.progress, hysteresis=settings.hysteresis,
                                 window=settings.progress_window)
        max_progress = max(previous.max_progress, progress)
        passed = _count_passed(world, p, previous.waypoints_passed)
        steps = previous.steps + 1

    if in_bounds(world, p):
        gamma, s_gamma = lookahead_point(path, world, p, settings.vehicle.collision_radius,
                                         progress=progress, step=settings.lookahead_step)
    else:
        gamma, s_gamma = path.point_at(progress), progress
    return EpisodeState(quad=quad, progress=progress, max_progress=max_progress, waypoints_passed=passed,
                        steps=steps, gamma=np.asarray(gamma, dtype=np.float64), s_gamma=float(s_gamma),
                        projection_point=path.point_at(progress))


def reset(world: World, path: GuidingPath, seed: int, settings: EnvSettings = EnvSettings()
          ) -> Tuple[EpisodeState, np.ndarray]:
    """
    Start an episode at a uniform collision-free point of the start region

    The yaw is uniform in [-pi, pi); velocity and body rates are zero and the
    attitude is level.

    Raises:
        GeometryError: If no collision-free start is found after the allowed attempts
    """
    rng = np.random.default_rng(seed)
    lo = np.array(world.start_region.lo)
    hi = np.array(world.start_region.hi)
    r_c = settings.vehicle.collision_radius

    @retry_attempts(max_retries=MAX_START_ATTEMPTS, retry_exceptions=(GeometryError,))
    def sample_start(attempt: int = 0) -> np.ndarray:
        p = rng.uniform(lo, hi)
        if is_collision(world, p, r_c):
            raise GeometryError(f"Start sample {p.tolist()} is in collision", primitive="start_region")
        return p

    try:
        position = sample_start()
    except RetryableError as e:
        raise GeometryError(f"No collision-free start in {MAX_START_ATTEMPTS} samples", primitive="start_region") from e

    yaw = rng.uniform(-math.pi, math.pi)
    quad = QuadState.hover(position, yaw=yaw)
    ep = make_episode_state(quad, world, path, settings)
    return ep, observe_teacher(ep, path, world, settings)


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------

def to_body(quad: QuadState, target: np.ndarray) -> np.ndarray:
    """Rᵀ(q) (x - p)"""
    return quat_to_rotation(quad.orientation).T @ (np.asarray(target, dtype=np.float64) - quad.position)


def observe_teacher(ep: EpisodeState, path: GuidingPath, world: World,
                    settings: EnvSettings = EnvSettings()) -> np.ndarray:
    quad = ep.quad
    rotation = quat_to_rotation(quad.orientation)
    next_index = min(ep.waypoints_passed, len(world.waypoints) - 1)
    clip = settings.observation_clip
    relative = [np.clip(to_body(quad, target), -clip, clip)
                for target in (world.waypoints[next_index], ep.gamma, ep.projection_point)]
    return np.concatenate([quad.velocity, rotation.ravel(), quad.body_rates] + relative).astype(np.float32)


def observe_student(ep: EpisodeState, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z_unit = z / max(float(np.linalg.norm(z)), EMBEDDING_EPS)
    rotation = quat_to_rotation(ep.quad.orientation)
    return np.concatenate([z_unit, ep.quad.velocity, rotation.ravel()]).astype(np.float32)


# ---------------------------------------------------------------------------
# Reward and termination
# ---------------------------------------------------------------------------

def yaw_error(ep: EpisodeState, gamma: np.ndarray) -> Optional[float]:
    """|wrapped yaw - direction to γ| in radians, or None when γ is straight above/below p"""
    offset = np.asarray(gamma, dtype=np.float64)[:2] - ep.quad.position[:2]
    if np.hypot(offset[0], offset[1]) < 1e-6:
        return None
    direction = math.atan2(offset[1], offset[0])
    return abs(wrap_angle(yaw_of(ep.quad.orientation) - direction))


def perception_reward(ep: EpisodeState, gamma: np.ndarray) -> float:
    """exp(-|yaw error|) in (0, 1]; 1.0 when γ is horizontally coincident with p"""
    error = yaw_error(ep, gamma)
    return 1.0 if error is None else math.exp(-error)


def stage_reward(prev: EpisodeState, cur: EpisodeState, path: GuidingPath, world: World,
                 w: RewardWeights) -> Tuple[float, Dict[str, float]]:
    """
    Per-step reward and its six weighted components

    Returns:
        (total, components) where total is the ordered sum of the components
    """
    terminal_penalty = cur.reason in ("collision", "out-of-bounds")
    components = {
        "progress": w.k_p * (cur.progress - prev.progress),
        "reached": w.k_s * cur.max_progress if cur.done else 0.0,
        "waypoint": w.k_wp * float(cur.waypoints_passed - prev.waypoints_passed),
        "collision": w.r_t if terminal_penalty else 0.0,
        "omega": w.k_omega * float(np.linalg.norm(cur.quad.body_rates)),
        "perception": w.k_pa * perception_reward(cur, cur.gamma),
    }
    total = 0.0
    for name in COMPONENTS:
        total += components[name]
    return total, components


def check_termination(ep: EpisodeState, world: World, path: GuidingPath,
                      settings: EnvSettings = EnvSettings()) -> Optional[str]:
    """First matching reason among out-of-bounds, collision, goal, timeout; None while running"""
    p = ep.quad.position
    if not in_bounds(world, p):
        return "out-of-bounds"
    if is_collision(world, p, settings.vehicle.collision_radius):
        return "collision"
    if ep.waypoints_passed >= len(world.waypoints):
        return "goal"
    if ep.steps >= settings.max_steps:
        return "timeout"
    return None


def step_episode(ep: EpisodeState, cmd: ControlCommand, world: World, path: GuidingPath,
                 settings: EnvSettings = EnvSettings(), params: Optional[VehicleParams] = None,
                 disturbance: Optional[np.ndarray] = None) -> Tuple[EpisodeState, float, Dict[str, float]]:
    """Advance one control period and score it"""
    if ep.done:
        raise GeometryError("Cannot step a finished episode", primitive="episode")
    params = params or settings.vehicle
    quad = advance(ep.quad, cmd, params, settings.control_dt, settings.substep, disturbance)
    cur = make_episode_state(quad, world, path, settings, previous=ep)
    reason = check_termination(cur, world, path, settings)
    if reason is not None:
        cur = replace(cur, done=True, reason=reason)
    reward, components = stage_reward(ep, cur, path, world, settings.weights)
    return cur, reward, components


# ---------------------------------------------------------------------------
# Service object
# ---------------------------------------------------------------------------

class FlightEnv:
    """
    One-episode-at-a-time environment around the pure episode functions

    Domain randomization (mass scaling and a Gaussian disturbance force) is
    applied only when ``randomize`` is set, i.e. during teacher training.
    """

    def __init__(self, world: World, path: GuidingPath, settings: EnvSettings = EnvSettings(),
                 randomize: bool = False, mass_range: float = 0.1, disturbance_std: float = 0.2):
        self.world = world
        self.path = path
        self.settings = settings
        self.randomize = randomize
        self.mass_range = mass_range
        self.disturbance_std = disturbance_std
        self.episode: Optional[EpisodeState] = None
        self.params = settings.vehicle
        self._rng = np.random.default_rng(0)
        self.last_info: Dict = {}

    def with_action_scale(self, action_scale: float) -> "FlightEnv":
        """Same world and path with the action scale a policy was trained with"""
        if float(action_scale) == self.settings.action_scale:
            return self
        return FlightEnv(self.world, self.path, replace(self.settings, action_scale=float(action_scale)),
                         self.randomize, self.mass_range, self.disturbance_std)

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng([int(seed), 1])
        self.params = self.settings.vehicle
        if self.randomize and self.mass_range > 0:
            scale = self._rng.uniform(1.0 - self.mass_range, 1.0 + self.mass_range)
            self.params = replace(self.params, mass=self.params.mass * scale)
        self.episode, obs = reset(self.world, self.path, seed, self.settings)
        self.last_info = {}
        return obs

    def command(self, action: np.ndarray) -> ControlCommand:
        # Normalized actions are referenced to the nominal vehicle, not the randomized one
        return action_to_command(action, self.settings.vehicle, self.settings.action_scale)

    def step(self, action: np.ndarray) -> Tuple[np.ndarray, float, bool, Dict]:
        if self.episode is None:
            raise GeometryError("FlightEnv.step called before reset", primitive="episode")
        cmd = self.command(action)
        disturbance = None
        if self.randomize and self.disturbance_std > 0:
            disturbance = self._rng.normal(0.0, self.disturbance_std, size=3)
        prev = self.episode
        self.episode, reward, components = step_episode(prev, cmd, self.world, self.path, self.settings,
                                                        params=self.params, disturbance=disturbance)
        info = {
            "reason": self.episode.reason,
            "components": components,
            "command": cmd,
            "r_pa": perception_reward(self.episode, self.episode.gamma),
            "yaw_error": yaw_error(self.episode, self.episode.gamma),
        }
        self.last_info = info
        return self.teacher_observation(), reward, self.episode.done, info

    def teacher_observation(self) -> np.ndarray:
        return observe_teacher(self.episode, self.path, self.world, self.settings)

    def render_depth(self, intr):
        from .depthcam import render_from_state

        return render_from_state(self.world, self.episode.quad, intr)

    @property
    def state(self) -> QuadState:
        return self.episode.quad


def create_flight_env(config, kind: Optional[str] = None, seed: Optional[int] = None, case: Optional[int] = None,
                      density: Optional[float] = None, randomize: bool = False, action_scale: float = 1.0,
                      weights: Optional[RewardWeights] = None) -> FlightEnv:
    """Factory: generate the world, plan the guiding path and wrap both in a FlightEnv"""
    from .planner import plan_guiding_path
    from .world import generate_environment

    env_cfg = config.environment
    world = generate_environment(
        kind or env_cfg.kind,
        env_cfg.seed if seed is None else seed,
        scale=env_cfg.scale,
        case=env_cfg.case if case is None else case,
        density=env_cfg.density if density is None else density,
        collision_radius=config.vehicle.collision_radius,
        n_samples=config.planner.n_samples,
        k=config.planner.k,
    )
    path = plan_guiding_path(world, n_samples=config.planner.n_samples, k=config.planner.k,
                             seed=world.seed, collision_radius=config.vehicle.collision_radius)
    settings = EnvSettings.from_config(config, action_scale=action_scale, weights=weights)
    return FlightEnv(world, path, settings, randomize=randomize and config.randomization.enabled,
                     mass_range=config.randomization.mass_range,
                     disturbance_std=config.randomization.disturbance_std)
