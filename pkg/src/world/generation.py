"""
Flight Stack - Procedural Environment Generation
Builds the Columns, Office, Racing and RacingMW arenas, deterministic in (kind, seed, case, density)
"""

from typing import List, Tuple

import numpy as np

from ..utils import (
    DisconnectedError,
    GeometryError,
    RetryableError,
    WorldGenerationError,
    get_logger,
    retry_attempts,
)
from .primitives import Box, Cylinder, Obstacle, Region, World
from .queries import clearance

ENVIRONMENT_KINDS = ("Columns", "Office", "Racing", "RacingMW")
MAX_GENERATION_ATTEMPTS = 5
START_HEIGHT = 1.5
REFERENCE_SCALE = 20.0

# (start, goal) as fractions of the arena side, one pair per evaluation case
CASE_LAYOUTS = (
    ((0.075, 0.50), (0.925, 0.50)),
    ((0.075, 0.075), (0.925, 0.925)),
    ((0.075, 0.925), (0.925, 0.075)),
    ((0.075, 0.25), (0.925, 0.75)),
)

logger = get_logger("world")


def _endpoints(scale: float, case: int) -> Tuple[np.ndarray, np.ndarray]:
    (sx, sy), (gx, gy) = CASE_LAYOUTS[case]
    height = START_HEIGHT * scale / REFERENCE_SCALE
    return np.array([sx * scale, sy * scale, height]), np.array([gx * scale, gy * scale, height])


def _keeps_clear(position_xy: np.ndarray, radius: float, protected: List[np.ndarray], margin: float) -> bool:
    return all(np.hypot(*(position_xy - p[:2])) > radius + margin for p in protected)


def _columns(rng: np.random.Generator, scale: float, height: float, density: float,
             protected: List[np.ndarray]) -> List[Obstacle]:
    unit = scale / REFERENCE_SCALE
    target = max(1, int(round(20 * density)))
    obstacles: List[Obstacle] = []
    for _ in range(50 * target):
        if len(obstacles) >= target:
            break
        radius = rng.uniform(0.3, 0.6) * unit
        center = np.array([rng.uniform(0.2 * scale, 0.8 * scale), rng.uniform(radius, scale - radius)])
        if _keeps_clear(center, radius, protected, 1.0 * unit):
            obstacles.append(Cylinder(center_xy=tuple(center), radius=radius, z_min=0.0, z_max=height))
    return obstacles


def _office(rng: np.random.Generator, scale: float, height: float, density: float,
            protected: List[np.ndarray]) -> List[Obstacle]:
    unit = scale / REFERENCE_SCALE
    thickness = 0.2 * unit
    door = 2.0 * unit
    wall_positions = (0.25 * scale, 0.5 * scale, 0.75 * scale)
    n_walls = max(1, int(round(len(wall_positions) * density)))
    obstacles: List[Obstacle] = []
    doors = []
    for x in wall_positions[:n_walls]:
        gap_lo = rng.uniform(0.1 * scale, 0.9 * scale - door)
        gap_hi = gap_lo + door
        doors.append(np.array([x, 0.5 * (gap_lo + gap_hi)]))
        obstacles.append(Box(lo=(x - thickness / 2, 0.0, 0.0), hi=(x + thickness / 2, gap_lo, height)))
        obstacles.append(Box(lo=(x - thickness / 2, gap_hi, 0.0), hi=(x + thickness / 2, scale, height)))

    # Furniture between the walls, kept away from doors, start and goal
    target = int(round(10 * density))
    placed = 0
    for _ in range(50 * max(target, 1)):
        if placed >= target:
            break
        size = rng.uniform(0.4, 1.2, size=3) * unit
        size[2] = rng.uniform(0.5, 1.0) * height
        center = np.array([rng.uniform(0.15 * scale, 0.85 * scale), rng.uniform(size[1], scale - size[1])])
        half_diag = float(np.hypot(size[0], size[1]) / 2)
        if not _keeps_clear(center, half_diag, protected, 1.0 * unit):
            continue
        if not all(np.hypot(*(center - d)) > half_diag + 1.5 * unit for d in doors):
            continue
        if any(abs(center[0] - x) < size[0] / 2 + thickness for x in wall_positions[:n_walls]):
            continue
        lo = (center[0] - size[0] / 2, center[1] - size[1] / 2, 0.0)
        hi = (center[0] + size[0] / 2, center[1] + size[1] / 2, size[2])
        obstacles.append(Box(lo=lo, hi=hi))
        placed += 1
    return obstacles


def _racing(rng: np.random.Generator, scale: float, height: float, density: float,
            start: np.ndarray, goal: np.ndarray, n_gates: int = 4) -> Tuple[List[Obstacle], List[np.ndarray]]:
    """Gates of two square posts across the start-goal direction, plus sparse clutter"""
    unit = scale / REFERENCE_SCALE
    post = 0.3 * unit
    gap = 1.6 * unit
    direction = (goal - start)[:2] / np.linalg.norm((goal - start)[:2])
    lateral = np.array([-direction[1], direction[0]])

    obstacles: List[Obstacle] = []
    gates: List[np.ndarray] = []
    for i in range(n_gates):
        along = start[:2] + (i + 1) / (n_gates + 1) * (goal - start)[:2]
        offset = rng.uniform(-0.1, 0.1) * scale
        center_xy = np.clip(along + offset * lateral, 0.15 * scale, 0.85 * scale)
        gates.append(np.array([center_xy[0], center_xy[1], start[2]]))
        for side in (-1.0, 1.0):
            p = center_xy + side * (gap / 2 + post / 2) * lateral
            obstacles.append(Box(lo=(p[0] - post / 2, p[1] - post / 2, 0.0),
                                 hi=(p[0] + post / 2, p[1] + post / 2, height)))

    protected = [start, goal] + gates
    target = int(round(10 * density))
    placed = 0
    for _ in range(50 * max(target, 1)):
        if placed >= target:
            break
        size = rng.uniform(0.3, 0.8) * unit
        center = rng.uniform(0.15 * scale, 0.85 * scale, size=2)
        if not _keeps_clear(center, size, protected, 1.5 * unit):
            continue
        obstacles.append(Box(lo=(center[0] - size / 2, center[1] - size / 2, 0.0),
                             hi=(center[0] + size / 2, center[1] + size / 2, height)))
        placed += 1
    return obstacles, gates


def _build(kind: str, seed: int, scale: float, case: int, density: float, attempt: int) -> World:
    rng = np.random.default_rng([int(seed), ENVIRONMENT_KINDS.index(kind), int(case), attempt])
    height = scale / 4.0
    start, goal = _endpoints(scale, case)
    waypoints = [goal]

    if kind == "Columns":
        obstacles = _columns(rng, scale, height, density, [start, goal])
    elif kind == "Office":
        obstacles = _office(rng, scale, height, density, [start, goal])
    else:
        obstacles, gates = _racing(rng, scale, height, density, start, goal)
        if kind == "RacingMW":
            waypoints = gates + [goal]

    half = 0.5 * scale / REFERENCE_SCALE
    return World(
        obstacles=tuple(obstacles),
        bounds=Box(lo=(0.0, 0.0, 0.0), hi=(scale, scale, height)),
        start_region=Region(lo=tuple(start - [half, half, 0.25 * half]), hi=tuple(start + [half, half, 0.25 * half])),
        waypoints=tuple(tuple(w) for w in waypoints),
        goal_tolerance=0.5,
        kind=kind,
        seed=int(seed),
    )


def validate_world(world: World, collision_radius: float) -> None:
    """
    Check the World invariants that depend on the vehicle size

    Raises:
        GeometryError: If a waypoint or the start-region center is closer than
            the collision radius to an obstacle or wall
    """
    for i, w in enumerate(world.waypoints):
        if clearance(world, np.array(w)) < collision_radius:
            raise GeometryError(f"Waypoint {i} {w} has clearance below the collision radius", primitive="world")
    if clearance(world, world.start_center) < collision_radius:
        raise GeometryError("Start region center has clearance below the collision radius", primitive="world")


def generate_environment(kind: str, seed: int, scale: float = 20.0, case: int = 0, density: float = 1.0,
                         collision_radius: float = 0.2, n_samples: int = 1000, k: int = 10) -> World:
    """
    Generate a benchmark-style environment

    Args:
        kind: One of Columns, Office, Racing, RacingMW
        seed: Generation seed; the result is deterministic in (kind, seed, scale, case, density)
        scale: Arena side length in meters (height is scale / 4)
        case: Start/goal layout index 0-3
        density: Fraction (0, 1] of the full obstacle count
        collision_radius: Vehicle radius used for clearance and reachability checks
        n_samples: Roadmap samples used for the reachability check
        k: Roadmap neighbours used for the reachability check

    Returns:
        A World whose waypoints are verified reachable in order from the start

    Raises:
        WorldGenerationError: If no reachable layout is found after the allowed retries
    """
    from ..planner import build_prm

    if kind not in ENVIRONMENT_KINDS:
        raise WorldGenerationError(f"Unknown environment kind '{kind}'", kind=kind, seed=seed)
    if not scale > 0:
        raise WorldGenerationError(f"Environment scale must be positive, got {scale}", kind=kind, seed=seed)
    if not 0 <= case < len(CASE_LAYOUTS):
        raise WorldGenerationError(f"Case must be in 0..{len(CASE_LAYOUTS) - 1}, got {case}", kind=kind, seed=seed)
    if not 0.0 < density <= 1.0:
        raise WorldGenerationError(f"Density must be in (0, 1], got {density}", kind=kind, seed=seed)

    @retry_attempts(max_retries=MAX_GENERATION_ATTEMPTS, retry_exceptions=(DisconnectedError, GeometryError))
    def attempt_generation(attempt: int = 0) -> World:
        world = _build(kind, seed, scale, case, density, attempt)
        validate_world(world, collision_radius)
        build_prm(world, n_samples=n_samples, k=k, seed=int(seed) * 1000 + attempt, collision_radius=collision_radius)
        return world

    try:
        world = attempt_generation()
    except RetryableError as e:
        raise WorldGenerationError(
            f"No reachable {kind} layout for seed {seed} after {MAX_GENERATION_ATTEMPTS} attempts: {e.__cause__}",
            kind=kind, seed=seed, attempts=MAX_GENERATION_ATTEMPTS
        ) from e

    logger.debug(f"🌍 Generated {kind} world | Seed: {seed} | Case: {case} | Obstacles: {len(world.obstacles)}")
    return world
