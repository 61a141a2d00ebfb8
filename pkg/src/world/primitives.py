"""
Flight Stack - Obstacle Primitives and World Container
Convex obstacle shapes plus the immutable World that bundles them with bounds, start region and waypoints
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np

from ..utils import GeometryError

Vector3 = Tuple[float, float, float]


def _as_vector(values: Sequence[float], length: int, name: str, primitive: str) -> Tuple[float, ...]:
    array = np.asarray(values, dtype=np.float64).reshape(-1)
    if array.shape != (length,) or not np.all(np.isfinite(array)):
        raise GeometryError(f"{primitive} field '{name}' must be {length} finite numbers, got {values}",
                            primitive=primitive)
    return tuple(float(x) for x in array)


@dataclass(frozen=True)
class Sphere:
    center: Vector3
    radius: float

    type_name = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vector(self.center, 3, "center", "sphere"))
        if not self.radius > 0:
            raise GeometryError(f"Sphere radius must be positive, got {self.radius}", primitive="sphere")
        object.__setattr__(self, "radius", float(self.radius))

    def bounding_sphere(self) -> Tuple[np.ndarray, float]:
        return np.array(self.center), self.radius

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "sphere", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners"""
    lo: Vector3
    hi: Vector3

    type_name = "box"
    allow_flat = False

    def __post_init__(self):
        lo = _as_vector(self.lo, 3, "min", self.type_name)
        hi = _as_vector(self.hi, 3, "max", self.type_name)
        if self.allow_flat:
            if not all(a <= b for a, b in zip(lo, hi)):
                raise GeometryError(f"Region min must not exceed max componentwise: {lo} vs {hi}",
                                    primitive=self.type_name)
        elif not all(a < b for a, b in zip(lo, hi)):
            raise GeometryError(f"Box min must be strictly below max componentwise: {lo} vs {hi}",
                                primitive=self.type_name)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def half_extents(self) -> np.ndarray:
        return 0.5 * (np.array(self.hi) - np.array(self.lo))

    def contains(self, p: np.ndarray) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= np.array(self.lo)) and np.all(p <= np.array(self.hi)))

    def contains_box(self, other: "Box") -> bool:
        return self.contains(np.array(other.lo)) and self.contains(np.array(other.hi))

    def bounding_sphere(self) -> Tuple[np.ndarray, float]:
        return self.center, float(np.linalg.norm(self.half_extents))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "box", "min": list(self.lo), "max": list(self.hi)}


@dataclass(frozen=True)
class Region(Box):
    """Axis-aligned sampling region; unlike an obstacle box it may collapse to a plane or a point"""

    type_name = "region"
    allow_flat = True


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder: circle in the xy-plane extruded over [z_min, z_max]"""
    center_xy: Tuple[float, float]
    radius: float
    z_min: float
    z_max: float

    type_name = "cylinder"

    def __post_init__(self):
        object.__setattr__(self, "center_xy", _as_vector(self.center_xy, 2, "center", "cylinder"))
        if not self.radius > 0:
            raise GeometryError(f"Cylinder radius must be positive, got {self.radius}", primitive="cylinder")
        if not self.z_min < self.z_max:
            raise GeometryError(f"Cylinder z-range is empty: [{self.z_min}, {self.z_max}]", primitive="cylinder")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "z_min", float(self.z_min))
        object.__setattr__(self, "z_max", float(self.z_max))

    def bounding_sphere(self) -> Tuple[np.ndarray, float]:
        half_height = 0.5 * (self.z_max - self.z_min)
        center = np.array([self.center_xy[0], self.center_xy[1], 0.5 * (self.z_min + self.z_max)])
        return center, float(np.hypot(self.radius, half_height))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "cylinder", "center": list(self.center_xy), "radius": self.radius,
                "z_min": self.z_min, "z_max": self.z_max}


Obstacle = Union[Sphere, Box, Cylinder]


def obstacle_from_dict(data: Dict[str, Any]) -> Obstacle:
    """Inverse of ``Obstacle.to_dict``"""
    kind = data.get("type")
    try:
        if kind == "sphere":
            return Sphere(center=data["center"], radius=data["radius"])
        if kind == "box":
            return Box(lo=data["min"], hi=data["max"])
        if kind == "cylinder":
            return Cylinder(center_xy=data["center"], radius=data["radius"],
                            z_min=data["z_min"], z_max=data["z_max"])
    except KeyError as e:
        raise GeometryError(f"Obstacle of type '{kind}' is missing field {e}", primitive=kind) from e
    raise GeometryError(f"Unknown obstacle type: {kind}", primitive=str(kind))


@dataclass(frozen=True, eq=False)
class PackedObstacles:
    """Per-type parameter arrays for vectorized queries"""
    sphere_centers: np.ndarray
    sphere_radii: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    cyl_centers: np.ndarray
    cyl_radii: np.ndarray
    cyl_z: np.ndarray

    @classmethod
    def pack(cls, obstacles: Sequence[Obstacle]) -> "PackedObstacles":
        spheres = [o for o in obstacles if isinstance(o, Sphere)]
        boxes = [o for o in obstacles if isinstance(o, Box)]
        cylinders = [o for o in obstacles if isinstance(o, Cylinder)]
        return cls(
            sphere_centers=np.array([s.center for s in spheres], dtype=np.float64).reshape(-1, 3),
            sphere_radii=np.array([s.radius for s in spheres], dtype=np.float64),
            box_lo=np.array([b.lo for b in boxes], dtype=np.float64).reshape(-1, 3),
            box_hi=np.array([b.hi for b in boxes], dtype=np.float64).reshape(-1, 3),
            cyl_centers=np.array([c.center_xy for c in cylinders], dtype=np.float64).reshape(-1, 2),
            cyl_radii=np.array([c.radius for c in cylinders], dtype=np.float64),
            cyl_z=np.array([(c.z_min, c.z_max) for c in cylinders], dtype=np.float64).reshape(-1, 2),
        )

    @property
    def count(self) -> int:
        return len(self.sphere_radii) + len(self.box_lo) + len(self.cyl_radii)


@dataclass(frozen=True, eq=False)
class World:
    """
    Immutable environment: obstacles, arena bounds, start region and ordered waypoints

    The final waypoint is the goal. All queries on a World are read-only.
    """
    obstacles: Tuple[Obstacle, ...]
    bounds: Box
    start_region: Region
    waypoints: Tuple[Vector3, ...]
    goal_tolerance: float = 0.5
    kind: str = "Custom"
    seed: int = 0
    packed: PackedObstacles = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "waypoints",
                           tuple(_as_vector(w, 3, "waypoint", "world") for w in self.waypoints))
        if not self.waypoints:
            raise GeometryError("World needs at least one waypoint (the goal)", primitive="world")
        if not self.bounds.contains_box(self.start_region):
            raise GeometryError("Start region must lie inside the world bounds", primitive="world")
        for i, w in enumerate(self.waypoints):
            if not self.bounds.contains(np.array(w)):
                raise GeometryError(f"Waypoint {i} {w} lies outside the world bounds", primitive="world")
        if not self.goal_tolerance > 0:
            raise GeometryError(f"Goal tolerance must be positive, got {self.goal_tolerance}", primitive="world")
        object.__setattr__(self, "packed", PackedObstacles.pack(self.obstacles))

    @property
    def goal(self) -> np.ndarray:
        return np.array(self.waypoints[-1])

    @property
    def waypoint_array(self) -> np.ndarray:
        return np.array(self.waypoints, dtype=np.float64)

    @property
    def start_center(self) -> np.ndarray:
        return self.start_region.center

    def with_waypoints(self, waypoints: Sequence[Sequence[float]]) -> "World":
        return World(obstacles=self.obstacles, bounds=self.bounds, start_region=self.start_region,
                     waypoints=tuple(tuple(w) for w in waypoints), goal_tolerance=self.goal_tolerance,
                     kind=self.kind, seed=self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "seed": int(self.seed),
            "bounds": {"min": list(self.bounds.lo), "max": list(self.bounds.hi)},
            "start_region": {"min": list(self.start_region.lo), "max": list(self.start_region.hi)},
            "goal_tolerance": float(self.goal_tolerance),
            "waypoints": [list(w) for w in self.waypoints],
            "obstacles": [o.to_dict() for o in self.obstacles],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "World":
        try:
            return cls(
                obstacles=tuple(obstacle_from_dict(o) for o in data.get("obstacles") or []),
                bounds=Box(lo=data["bounds"]["min"], hi=data["bounds"]["max"]),
                start_region=Region(lo=data["start_region"]["min"], hi=data["start_region"]["max"]),
                waypoints=tuple(tuple(w) for w in data["waypoints"]),
                goal_tolerance=float(data.get("goal_tolerance", 0.5)),
                kind=str(data.get("kind", "Custom")),
                seed=int(data.get("seed", 0)),
            )
        except (KeyError, TypeError) as e:
            raise GeometryError(f"World description is missing or malformed: {e}", primitive="world") from e


def open_world(size: Sequence[float] = (20.0, 20.0, 5.0), start: Sequence[float] = (1.5, 10.0, 1.5),
               goal: Sequence[float] = (18.5, 10.0, 1.5), obstacles: Sequence[Obstacle] = (),
               waypoints: Sequence[Sequence[float]] = None, start_half_extent: float = 0.0) -> World:
    """Convenience constructor for hand-built worlds with a box start region around ``start``"""
    start = np.asarray(start, dtype=np.float64)
    half = np.full(3, start_half_extent)
    route = list(waypoints or []) + [goal]
    return World(
        obstacles=tuple(obstacles),
        bounds=Box(lo=(0.0, 0.0, 0.0), hi=tuple(size)),
        start_region=Region(lo=tuple(start - half), hi=tuple(start + half)),
        waypoints=tuple(tuple(float(x) for x in w) for w in route),
    )
