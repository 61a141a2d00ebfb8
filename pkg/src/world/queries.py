"""
Flight Stack - World Geometry Queries
Exact signed distances, collision tests and capsule line-of-sight against convex primitives

All point queries accept a single point (3,) or a batch (N, 3).
"""

import numpy as np

from ..utils import GeometryError
from .primitives import World

# Golden-section iterations for segment distance to boxes / cylinders.
# The bracket shrinks to 0.618**60 ≈ 3e-13 of the segment.
GOLDEN_ITERATIONS = 60
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Per-primitive signed distances (broadcasting over leading axes)
# ---------------------------------------------------------------------------

def sphere_distance(points: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points - centers, axis=-1) - radii


def box_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    q = np.abs(points - center) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


def cylinder_distance(points: np.ndarray, centers_xy: np.ndarray, radii: np.ndarray,
                      z_range: np.ndarray) -> np.ndarray:
    radial = np.linalg.norm(points[..., :2] - centers_xy, axis=-1) - radii
    z_center = 0.5 * (z_range[..., 0] + z_range[..., 1])
    z_half = 0.5 * (z_range[..., 1] - z_range[..., 0])
    axial = np.abs(points[..., 2] - z_center) - z_half
    outside = np.hypot(np.maximum(radial, 0.0), np.maximum(axial, 0.0))
    inside = np.minimum(np.maximum(radial, axial), 0.0)
    return outside + inside


# ---------------------------------------------------------------------------
# Point queries
# ---------------------------------------------------------------------------

def _as_points(p) -> np.ndarray:
    return np.atleast_2d(np.asarray(p, dtype=np.float64))


def _unbatch(values: np.ndarray, p):
    if np.asarray(p).ndim == 1:
        return float(values[0])
    return values


def obstacle_distances(world: World, points: np.ndarray) -> np.ndarray:
    """Signed distance of every point to every obstacle, shape (N, n_obstacles)"""
    packed = world.packed
    points = _as_points(points)
    columns = []
    if len(packed.sphere_radii):
        columns.append(sphere_distance(points[:, None, :], packed.sphere_centers[None], packed.sphere_radii[None]))
    if len(packed.box_lo):
        columns.append(box_distance(points[:, None, :], packed.box_lo[None], packed.box_hi[None]))
    if len(packed.cyl_radii):
        columns.append(cylinder_distance(points[:, None, :], packed.cyl_centers[None],
                                         packed.cyl_radii[None], packed.cyl_z[None]))
    if not columns:
        return np.empty((len(points), 0))
    return np.concatenate(columns, axis=1)


def obstacle_clearance(world: World, p):
    """Signed distance to the nearest obstacle surface (bounds ignored); +inf without obstacles"""
    distances = obstacle_distances(world, p)
    if distances.shape[1] == 0:
        values = np.full(distances.shape[0], np.inf)
    else:
        values = distances.min(axis=1)
    return _unbatch(values, p)


def bounds_distance(world: World, p):
    """Distance to the nearest arena wall; negative outside the bounds"""
    points = _as_points(p)
    lo = np.array(world.bounds.lo)
    hi = np.array(world.bounds.hi)
    values = np.minimum(points - lo, hi - points).min(axis=1)
    return _unbatch(values, p)


def clearance(world: World, p):
    """
    Signed clearance: min of obstacle distance and distance to the bounds walls

    Negative inside an obstacle or outside the bounds.
    """
    points = _as_points(p)
    values = np.minimum(np.atleast_1d(obstacle_clearance(world, points)),
                        np.atleast_1d(bounds_distance(world, points)))
    return _unbatch(values, p)


def in_bounds(world: World, p) -> bool:
    return bool(np.all(np.asarray(bounds_distance(world, _as_points(p))) >= 0.0))


def is_collision(world: World, p, r_c: float):
    """True iff clearance(world, p) < r_c"""
    if not r_c > 0:
        raise GeometryError(f"Collision radius must be positive, got {r_c}", primitive="vehicle")
    values = np.atleast_1d(clearance(world, _as_points(p))) < r_c
    if np.asarray(p).ndim == 1:
        return bool(values[0])
    return values


# ---------------------------------------------------------------------------
# Segment queries
# ---------------------------------------------------------------------------

def _segment_sphere_distance(a: np.ndarray, d: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Closed-form distance from segments a + t d, t in [0, 1], to spheres (elementwise)"""
    dd = np.sum(d * d, axis=-1)
    safe = np.where(dd > 0.0, dd, 1.0)
    t = np.clip(np.sum((centers - a) * d, axis=-1) / safe, 0.0, 1.0)
    t = np.where(dd > 0.0, t, 0.0)
    closest = a + t[..., None] * d
    return np.linalg.norm(closest - centers, axis=-1) - radii


def _golden_section_min(distance_fn, a: np.ndarray, d: np.ndarray) -> np.ndarray:
    """
    Minimize a convex distance along each segment by golden-section search

    distance_fn maps points (M, 3) to distances (M,) with the obstacle
    parameters already paired to each row.
    """
    m = len(a)
    lo = np.zeros(m)
    hi = np.ones(m)
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1 = distance_fn(a + x1[:, None] * d)
    f2 = distance_fn(a + x2[:, None] * d)
    for _ in range(GOLDEN_ITERATIONS):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2_new = np.where(left, x1, lo + _INV_PHI * (hi - lo))
        x1_new = np.where(left, hi - _INV_PHI * (hi - lo), x2)
        f2_new = np.where(left, f1, np.nan)
        f1_new = np.where(left, np.nan, f2)
        need1 = left
        need2 = ~left
        if need1.any():
            f1_new[need1] = distance_fn(a[need1] + x1_new[need1, None] * d[need1], need1)
        if need2.any():
            f2_new[need2] = distance_fn(a[need2] + x2_new[need2, None] * d[need2], need2)
        x1, x2, f1, f2 = x1_new, x2_new, f1_new, f2_new
    t_mid = 0.5 * (lo + hi)
    candidates = np.stack([
        distance_fn(a + t_mid[:, None] * d),
        distance_fn(a),
        distance_fn(a + d),
    ])
    return candidates.min(axis=0)


def _paired(fn, *params):
    """Bind per-row obstacle parameters; an optional row mask selects a subset"""
    def distance(points, mask=None):
        if mask is None:
            return fn(points, *params)
        return fn(points, *(p[mask] for p in params))
    return distance


def segment_clearance(world: World, a, b) -> np.ndarray:
    """
    Exact distance from segments [a_i, b_i] to the nearest obstacle (bounds ignored)

    ``a`` may be a single point shared by all segments. Returns shape (N,),
    +inf for worlds without obstacles.
    """
    b = _as_points(b)
    a = np.broadcast_to(_as_points(a), b.shape).astype(np.float64)
    d = b - a
    n = len(b)
    best = np.full(n, np.inf)
    packed = world.packed
    if packed.count == 0 or n == 0:
        return best

    if len(packed.sphere_radii):
        dist = _segment_sphere_distance(a[:, None, :], d[:, None, :], packed.sphere_centers[None],
                                        packed.sphere_radii[None])
        best = np.minimum(best, dist.min(axis=1))

    # Upper bound from exact point distances at both ends and the midpoint
    ends = np.concatenate([a, b, a + 0.5 * d])
    point_best = obstacle_distances(world, ends).min(axis=1).reshape(3, n).min(axis=0)
    best = np.minimum(best, point_best)

    for kind in ("box", "cylinder"):
        if kind == "box":
            if not len(packed.box_lo):
                continue
            lo, hi = packed.box_lo, packed.box_hi
            centers = 0.5 * (lo + hi)
            bound_radii = np.linalg.norm(0.5 * (hi - lo), axis=1)
            params = (lo, hi)
            fn = box_distance
        else:
            if not len(packed.cyl_radii):
                continue
            z_half = 0.5 * (packed.cyl_z[:, 1] - packed.cyl_z[:, 0])
            centers = np.column_stack([packed.cyl_centers, packed.cyl_z.mean(axis=1)])
            bound_radii = np.hypot(packed.cyl_radii, z_half)
            params = (packed.cyl_centers, packed.cyl_radii, packed.cyl_z)
            fn = cylinder_distance

        # Bounding-sphere distance is a lower bound; refine only pairs that can beat the current best
        lower = _segment_sphere_distance(a[:, None, :], d[:, None, :], centers[None], bound_radii[None])
        rows, cols = np.nonzero(lower < best[:, None])
        if len(rows) == 0:
            continue
        paired = _paired(fn, *(p[cols] for p in params))
        exact = _golden_section_min(paired, a[rows], d[rows])
        np.minimum.at(best, rows, exact)

    return best


def visible_from(world: World, a, b, r_c: float) -> np.ndarray:
    """Capsule visibility of many segments, shape (N,) booleans"""
    return segment_clearance(world, a, b) >= r_c


def line_of_sight(world: World, a, b, r_c: float) -> bool:
    """True iff the capsule of radius r_c around segment ab touches no obstacle"""
    return bool(visible_from(world, np.asarray(a, dtype=np.float64), _as_points(b), r_c)[0])
