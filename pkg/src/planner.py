"""
Flight Stack - Guiding Path Planner
Probabilistic roadmap, shortest guiding path, arc-length progress and the farthest visible lookahead point
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .utils import DisconnectedError, PlannerError, get_logger
from .world import World, is_collision, visible_from

logger = get_logger("planner")


@dataclass(frozen=True, eq=False)
class Roadmap:
    """
    Undirected visibility graph over collision-free samples

    ``mandatory`` holds the node ids of the start-region center followed by
    each World waypoint, in order.
    """
    nodes: np.ndarray
    graph: nx.Graph
    mandatory: Tuple[int, ...]
    collision_radius: float

    @property
    def start_node(self) -> int:
        return self.mandatory[0]

    @property
    def waypoint_nodes(self) -> Tuple[int, ...]:
        return self.mandatory[1:]

    def node_index(self, point: Sequence[float], tol: float = 1e-9) -> int:
        distances = np.linalg.norm(self.nodes - np.asarray(point, dtype=np.float64), axis=1)
        index = int(np.argmin(distances))
        if distances[index] > tol:
            raise PlannerError(f"Point {list(point)} is not a roadmap node")
        return index

    def edges(self) -> List[Tuple[int, int, float]]:
        return [(u, v, d["weight"]) for u, v, d in self.graph.edges(data=True)]


@dataclass(frozen=True, eq=False)
class GuidingPath:
    """Polyline from start to goal with cumulative arc length"""
    vertices: np.ndarray
    arc_lengths: np.ndarray
    waypoint_indices: Tuple[int, ...]

    @classmethod
    def from_vertices(cls, vertices: Sequence[Sequence[float]], waypoint_indices: Sequence[int] = None) -> "GuidingPath":
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        if len(vertices) < 2:
            raise PlannerError("A guiding path needs at least two vertices")
        segment_lengths = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
        if np.any(segment_lengths <= 0.0):
            raise PlannerError("Guiding path vertices must be distinct consecutive points")
        arc = np.concatenate([[0.0], np.cumsum(segment_lengths)])
        indices = tuple(waypoint_indices) if waypoint_indices is not None else (len(vertices) - 1,)
        return cls(vertices=vertices, arc_lengths=arc, waypoint_indices=indices)

    @property
    def total_length(self) -> float:
        return float(self.arc_lengths[-1])

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def goal(self) -> np.ndarray:
        return self.vertices[-1]

    def point_at(self, s) -> np.ndarray:
        """Interpolate the point(s) at arc length s, clamped to [0, total_length]"""
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.total_length)
        return np.stack([np.interp(s, self.arc_lengths, self.vertices[:, i]) for i in range(3)], axis=-1)

    def project(self, p: np.ndarray, s_min: float = -np.inf, s_max: float = np.inf) -> Tuple[float, np.ndarray]:
        """
        Closest point on the polyline restricted to the arc window [s_min, s_max]

        Returns:
            (arc length, closest point)
        """
        p = np.asarray(p, dtype=np.float64)
        s_min = max(s_min, 0.0)
        s_max = min(s_max, self.total_length)
        if s_max < s_min:
            s_min = s_max

        a = self.vertices[:-1]
        d = np.diff(self.vertices, axis=0)
        seg_start = self.arc_lengths[:-1]
        seg_len = np.diff(self.arc_lengths)

        # Clip each segment to the window in its own parameter t
        t_lo = np.clip((s_min - seg_start) / seg_len, 0.0, 1.0)
        t_hi = np.clip((s_max - seg_start) / seg_len, 0.0, 1.0)
        valid = t_hi >= t_lo
        t = np.sum((p - a) * d, axis=1) / (seg_len * seg_len)
        t = np.clip(t, t_lo, t_hi)
        closest = a + t[:, None] * d
        distances = np.linalg.norm(closest - p, axis=1)
        distances[~valid] = np.inf
        best = int(np.argmin(distances))
        s = float(seg_start[best] + t[best] * seg_len[best])
        return s, closest[best]

    def to_frame(self) -> pd.DataFrame:
        """Vertex list with arc length, for export in the trajectory column layout"""
        return path_to_frame(self)


# ---------------------------------------------------------------------------
# Roadmap construction
# ---------------------------------------------------------------------------

def _sample_free(world: World, n_samples: int, rng: np.random.Generator, collision_radius: float) -> np.ndarray:
    lo = np.array(world.bounds.lo)
    hi = np.array(world.bounds.hi)
    samples = []
    count = 0
    # Bounded rejection sampling in batches
    for _ in range(200):
        if count >= n_samples:
            break
        batch = rng.uniform(lo, hi, size=(max(2 * (n_samples - count), 64), 3))
        free = batch[~is_collision(world, batch, collision_radius)]
        samples.append(free[: n_samples - count])
        count += len(samples[-1])
    if not samples:
        return np.empty((0, 3))
    return np.concatenate(samples)


def build_prm(world: World, n_samples: int = 1000, k: int = 10, seed: int = 0,
              collision_radius: float = 0.2) -> Roadmap:
    """
    Build a probabilistic roadmap and verify that every waypoint is reachable

    Args:
        world: Environment to plan in
        n_samples: Number of collision-free random nodes (mandatory nodes are extra)
        k: Nearest neighbours each node tries to connect to
        seed: Sampling seed; the roadmap is deterministic in (world, n_samples, k, seed)
        collision_radius: Capsule radius for edge visibility

    Returns:
        Roadmap whose mandatory nodes are the start-region center and the waypoints

    Raises:
        PlannerError: On invalid sizes
        DisconnectedError: If a waypoint is not in the start's connected component
    """
    if n_samples < 2:
        raise PlannerError(f"n_samples must be at least 2, got {n_samples}")
    if k < 1:
        raise PlannerError(f"k must be at least 1, got {k}")

    rng = np.random.default_rng(seed)
    mandatory_points = np.vstack([world.start_center[None, :], world.waypoint_array])
    samples = _sample_free(world, n_samples, rng, collision_radius)
    nodes = np.vstack([mandatory_points, samples])
    mandatory = tuple(range(len(mandatory_points)))

    tree = cKDTree(nodes)
    n_neighbours = min(k + 1, len(nodes))
    _, neighbours = tree.query(nodes, k=n_neighbours)
    neighbours = neighbours.reshape(len(nodes), -1)

    # Candidate undirected edges, deduplicated as (min, max) pairs
    rows = np.repeat(np.arange(len(nodes)), neighbours.shape[1])
    cols = neighbours.reshape(-1)
    keep = rows != cols
    pairs = np.unique(np.sort(np.column_stack([rows[keep], cols[keep]]), axis=1), axis=0)

    graph = nx.Graph()
    graph.add_nodes_from(range(len(nodes)))
    if len(pairs):
        visible = visible_from(world, nodes[pairs[:, 0]], nodes[pairs[:, 1]], collision_radius)
        lengths = np.linalg.norm(nodes[pairs[:, 0]] - nodes[pairs[:, 1]], axis=1)
        graph.add_weighted_edges_from(
            (int(u), int(v), float(w)) for (u, v), w in zip(pairs[visible], lengths[visible])
        )

    start_component = nx.node_connected_component(graph, mandatory[0])
    for i, node in enumerate(mandatory[1:]):
        if node not in start_component:
            raise DisconnectedError(
                f"Waypoint {i} at {mandatory_points[i + 1].tolist()} is not connected to the start",
                waypoint_index=i, waypoint=mandatory_points[i + 1]
            )

    logger.debug(f"🗺️ Roadmap built | Nodes: {graph.number_of_nodes()} | Edges: {graph.number_of_edges()}")
    return Roadmap(nodes=nodes, graph=graph, mandatory=mandatory, collision_radius=collision_radius)


# ---------------------------------------------------------------------------
# Path extraction
# ---------------------------------------------------------------------------

def _shortcut(world: World, points: np.ndarray, collision_radius: float) -> np.ndarray:
    """Greedy shortcut: from each kept vertex jump to the farthest directly visible one"""
    kept = [0]
    i = 0
    while i < len(points) - 1:
        visible = visible_from(world, points[i], points[i + 1:], collision_radius)
        # Consecutive roadmap vertices are always visible, so index 0 is True
        farthest = int(np.nonzero(visible)[0].max()) if visible.any() else 0
        i = i + 1 + farthest
        kept.append(i)
    return points[kept]


def raw_dijkstra_path(roadmap: Roadmap, via: Sequence[int]) -> np.ndarray:
    """Concatenated Dijkstra node sequences between consecutive via nodes (no shortcut)"""
    legs = _dijkstra_legs(roadmap, via)
    sequence = [legs[0][0]] + [node for leg in legs for node in leg[1:]]
    return roadmap.nodes[sequence]


def _dijkstra_legs(roadmap: Roadmap, via: Sequence[int]) -> List[List[int]]:
    legs = []
    for i, (u, v) in enumerate(zip(via[:-1], via[1:])):
        try:
            legs.append(nx.dijkstra_path(roadmap.graph, u, v, weight="weight"))
        except (nx.NetworkXNoPath, nx.NodeNotFound) as e:
            raise DisconnectedError(f"No roadmap path to via point {i + 1}", waypoint_index=i,
                                    waypoint=roadmap.nodes[v]) from e
    return legs


def shortest_path(roadmap: Roadmap, world: World, via: Optional[Sequence] = None) -> GuidingPath:
    """
    Shortest guiding path through the ordered via points

    Each leg is a Dijkstra path on the roadmap, shortcut greedily on its own so
    that every via point stays a path vertex.

    Args:
        roadmap: Roadmap from build_prm
        world: World used for shortcut visibility
        via: Ordered node ids or points; defaults to the roadmap's mandatory nodes

    Returns:
        GuidingPath from the first to the last via point
    """
    if via is None:
        via_nodes = list(roadmap.mandatory)
    else:
        via_nodes = [int(v) if np.ndim(v) == 0 else roadmap.node_index(v) for v in via]
    if len(via_nodes) < 2:
        raise PlannerError("shortest_path needs at least two via points")

    pieces = []
    waypoint_indices = []
    for leg in _dijkstra_legs(roadmap, via_nodes):
        points = _shortcut(world, roadmap.nodes[leg], roadmap.collision_radius)
        pieces.append(points if not pieces else points[1:])
        waypoint_indices.append(sum(len(p) for p in pieces) - 1)

    vertices = np.concatenate(pieces)
    # Drop zero-length steps (repeated via points)
    keep = np.concatenate([[True], np.linalg.norm(np.diff(vertices, axis=0), axis=1) > 0.0])
    new_index = np.cumsum(keep) - 1
    vertices = vertices[keep]
    indices = tuple(int(new_index[i]) for i in waypoint_indices)
    return GuidingPath.from_vertices(vertices, indices)


def plan_guiding_path(world: World, n_samples: int = 1000, k: int = 10, seed: int = 0,
                      collision_radius: float = 0.2) -> GuidingPath:
    """Roadmap + shortest path from the start-region center through every waypoint"""
    roadmap = build_prm(world, n_samples=n_samples, k=k, seed=seed, collision_radius=collision_radius)
    path = shortest_path(roadmap, world)
    logger.info(f"🧭 Guiding path planned | Vertices: {len(path.vertices)} | Length: {path.total_length:.2f} m")
    return path


# ---------------------------------------------------------------------------
# Path-relative quantities
# ---------------------------------------------------------------------------

def path_progress(path: GuidingPath, p: np.ndarray, previous: Optional[float] = None,
                  hysteresis: float = 0.5, window: float = 3.0) -> float:
    """
    Arc length of the closest point on the path

    Without ``previous`` the projection is global. With the previous progress
    the search is restricted to [previous - hysteresis, previous + window], so
    within an episode progress never drops by more than ``hysteresis``.
    """
    if previous is None:
        s, _ = path.project(p)
    else:
        s, _ = path.project(p, previous - hysteresis, previous + window)
    return s


@dataclass
class ProgressCursor:
    """Episode-local progress state; owned by exactly one rollout"""
    path: GuidingPath
    hysteresis: float = 0.5
    window: float = 3.0
    progress: Optional[float] = None
    projection: Optional[np.ndarray] = None

    def update(self, p: np.ndarray) -> float:
        if self.progress is None:
            s, point = self.path.project(p)
        else:
            s, point = self.path.project(p, self.progress - self.hysteresis, self.progress + self.window)
        self.progress = s
        self.projection = point
        return s


def lookahead_samples(path: GuidingPath, s_from: float, step: float = 0.1) -> Tuple[np.ndarray, np.ndarray]:
    """Arc lengths and points from s_from to the goal at ``step`` spacing, goal included"""
    s_from = float(np.clip(s_from, 0.0, path.total_length))
    count = int(np.floor((path.total_length - s_from) / step + 1e-9)) + 1
    s = s_from + step * np.arange(count)
    if path.total_length - s[-1] > 1e-9:
        s = np.append(s, path.total_length)
    return s, path.point_at(s)


def lookahead_point(path: GuidingPath, world: World, p: np.ndarray, r_c: float,
                    progress: Optional[float] = None, step: float = 0.1) -> Tuple[np.ndarray, float]:
    """
    Farthest point on the path, at or beyond the current progress, visible from p

    Args:
        path: Guiding path
        world: World for capsule visibility
        p: Current position
        r_c: Capsule radius
        progress: Current progress; defaults to the global projection of p
        step: Path discretization in meters

    Returns:
        (γ, s_γ); if no sample is visible, the closest path point and its arc length
    """
    p = np.asarray(p, dtype=np.float64)
    if progress is None:
        progress = path_progress(path, p)
    s, points = lookahead_samples(path, progress, step)
    visible = visible_from(world, p, points, r_c)
    if visible.any():
        index = int(np.nonzero(visible)[0].max())
        return points[index], float(s[index])
    return path.point_at(progress), float(progress)


def path_to_frame(path: GuidingPath) -> pd.DataFrame:
    """Path vertices in trajectory-file columns (positions filled, the rest zero, t = arc length)"""
    from .evalbench.trajectory import TRAJECTORY_COLUMNS

    frame = pd.DataFrame(0.0, index=range(len(path.vertices)), columns=TRAJECTORY_COLUMNS)
    frame["t"] = path.arc_lengths
    frame[["px", "py", "pz"]] = path.vertices
    frame["qw"] = 1.0
    return frame
