"""
Flight Stack - Planner Tests
"""

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from src.planner import (
    GuidingPath,
    ProgressCursor,
    build_prm,
    lookahead_point,
    lookahead_samples,
    path_progress,
    path_to_frame,
    raw_dijkstra_path,
    shortest_path,
)
from src.utils import DisconnectedError, PlannerError
from src.world import Box, Cylinder, World, clearance, generate_environment, line_of_sight, open_world

R_C = 0.2


def walled_world(gap: bool) -> World:
    """Wall across x = 10 with an optional 4 m door centred on y = 14"""
    if gap:
        walls = (Box(lo=(9.8, 0.0, 0.0), hi=(10.2, 12.0, 5.0)), Box(lo=(9.8, 16.0, 0.0), hi=(10.2, 20.0, 5.0)))
    else:
        walls = (Box(lo=(9.8, 0.0, 0.0), hi=(10.2, 20.0, 5.0)),)
    return open_world(obstacles=walls)


def grid_oracle_length(world: World, start: np.ndarray, goal: np.ndarray, resolution: float = 0.25) -> float:
    """Dijkstra over a 26-connected occupancy grid, start and goal snapped to the grid"""
    lo, hi = np.array(world.bounds.lo), np.array(world.bounds.hi)
    axes = [np.arange(lo[i], hi[i] + 1e-9, resolution) for i in range(3)]
    shape = tuple(len(a) for a in axes)
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    free = clearance(world, points) >= R_C
    index = np.arange(len(points)).reshape(shape)

    rows, cols, weights = [], [], []
    offsets = [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) > (0, 0, 0)]
    for di, dj, dk in offsets:
        src = index[max(0, -di):shape[0] - max(0, di), max(0, -dj):shape[1] - max(0, dj),
                    max(0, -dk):shape[2] - max(0, dk)]
        dst = index[max(0, di):shape[0] - max(0, -di), max(0, dj):shape[1] - max(0, -dj),
                    max(0, dk):shape[2] - max(0, -dk)]
        keep = free[src.ravel()] & free[dst.ravel()]
        rows.append(src.ravel()[keep])
        cols.append(dst.ravel()[keep])
        weights.append(np.full(keep.sum(), resolution * np.sqrt(di * di + dj * dj + dk * dk)))
    graph = csr_matrix((np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(len(points), len(points)))

    start_id = int(np.argmin(np.linalg.norm(points - start, axis=1)))
    goal_id = int(np.argmin(np.linalg.norm(points - goal, axis=1)))
    distances = dijkstra(graph, directed=False, indices=start_id)
    return float(distances[goal_id])


def polyline_length(points: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def test_prm_connects_empty_world(open_arena):
    roadmap = build_prm(open_arena, n_samples=50, k=10, seed=0)
    path = shortest_path(roadmap, open_arena)

    assert len(roadmap.nodes) == 52
    np.testing.assert_allclose(path.vertices, [open_arena.start_center, open_arena.goal])
    assert path.total_length == pytest.approx(17.0)


def test_prm_reports_unreached_waypoint():
    with pytest.raises(DisconnectedError) as excinfo:
        build_prm(walled_world(gap=False), n_samples=200, k=10, seed=0)
    assert excinfo.value.waypoint_index == 0


def test_prm_rejects_bad_sizes(open_arena):
    with pytest.raises(PlannerError):
        build_prm(open_arena, n_samples=1, k=5)
    with pytest.raises(PlannerError):
        build_prm(open_arena, n_samples=50, k=0)


def test_prm_edges_are_symmetric_and_visible():
    world = walled_world(gap=True)
    roadmap = build_prm(world, n_samples=1000, k=10, seed=3)

    for u, v, weight in roadmap.edges():
        assert roadmap.graph.has_edge(v, u)
        assert weight == pytest.approx(np.linalg.norm(roadmap.nodes[u] - roadmap.nodes[v]))
        assert line_of_sight(world, roadmap.nodes[u], roadmap.nodes[v], R_C)


def test_prm_is_deterministic():
    world = walled_world(gap=True)
    first = build_prm(world, n_samples=1000, k=10, seed=11)
    second = build_prm(world, n_samples=1000, k=10, seed=11)

    assert np.array_equal(first.nodes, second.nodes)
    assert sorted(first.edges()) == sorted(second.edges())


def test_guiding_path_invariants():
    world = walled_world(gap=True)
    roadmap = build_prm(world, n_samples=1000, k=10, seed=5)
    path = shortest_path(roadmap, world)

    assert np.all(np.diff(path.arc_lengths) > 0)
    np.testing.assert_allclose(path.start, world.start_center)
    np.testing.assert_allclose(path.goal, world.goal)
    for a, b in zip(path.vertices[:-1], path.vertices[1:]):
        assert line_of_sight(world, a, b, R_C)


def test_shortcut_shortens_raw_dijkstra_path():
    world = open_world(obstacles=(Cylinder(center_xy=(10.0, 10.0), radius=1.5, z_min=0.0, z_max=5.0),),
                       start=(2.0, 10.0, 2.5), goal=(18.0, 10.0, 2.5))
    roadmap = build_prm(world, n_samples=500, k=10, seed=2)
    raw = raw_dijkstra_path(roadmap, roadmap.mandatory)
    path = shortest_path(roadmap, world)

    assert len(path.vertices) < len(raw)
    assert path.total_length <= polyline_length(raw) + 1e-9


@pytest.mark.slow
def test_prm_path_close_to_grid_oracle():
    world = generate_environment("Columns", seed=1)
    roadmap = build_prm(world, n_samples=500, k=10, seed=1)
    path = shortest_path(roadmap, world)

    oracle = grid_oracle_length(world, world.start_center, world.goal)
    assert abs(path.total_length - oracle) / oracle < 0.05


def test_path_progress_on_vertices_and_midpoints():
    path = GuidingPath.from_vertices([[0, 0, 1], [4, 0, 1], [4, 3, 1], [8, 3, 1]])

    for vertex, s in zip(path.vertices, path.arc_lengths):
        assert path_progress(path, vertex) == pytest.approx(s)
    assert path_progress(path, np.array([2.0, 0.0, 1.0])) == pytest.approx(2.0)
    assert path_progress(path, np.array([2.0, 1.0, 1.0])) == pytest.approx(2.0)


def test_path_progress_against_dense_sampling(rng):
    path = GuidingPath.from_vertices([[0, 0, 1], [5, 0, 1], [5, 4, 2], [9, 6, 2]])
    s_dense = np.linspace(0.0, path.total_length, 10_001)
    dense = path.point_at(s_dense)
    spacing = s_dense[1]

    for p in rng.uniform([-1, -1, 0], [10, 7, 3], size=(100, 3)):
        distances = np.linalg.norm(dense - p, axis=1)
        best = np.min(distances)
        s = path_progress(path, p)
        assert np.linalg.norm(path.point_at(s) - p) <= best + 1e-9
        assert np.min(np.abs(s_dense[distances <= best + spacing] - s)) <= 2 * spacing


def test_progress_hysteresis_limits_backward_jumps():
    # Hairpin: the far leg passes close to the start of the near leg
    path = GuidingPath.from_vertices([[0, 0, 1], [10, 0, 1], [10, 1, 1], [0, 1, 1]])
    cursor = ProgressCursor(path, hysteresis=0.5, window=3.0)

    history = [cursor.update(np.array([x, 0.5, 1.0])) for x in np.linspace(0.0, 10.0, 51)]
    history += [cursor.update(np.array([x, 0.5, 1.0])) for x in np.linspace(10.0, 0.0, 51)]

    assert all(b >= a - 0.5 for a, b in zip(history[:-1], history[1:]))
    assert history[-1] > 15.0


def test_lookahead_reaches_goal_in_open_space(open_arena):
    path = GuidingPath.from_vertices([open_arena.start_center, open_arena.goal])
    gamma, s_gamma = lookahead_point(path, open_arena, open_arena.start_center, R_C)
    np.testing.assert_allclose(gamma, open_arena.goal)
    assert s_gamma == pytest.approx(path.total_length)

    gamma, s_gamma = lookahead_point(path, open_arena, open_arena.goal, R_C)
    np.testing.assert_allclose(gamma, open_arena.goal)
    assert s_gamma == pytest.approx(path.total_length)


def test_lookahead_matches_exhaustive_scan():
    world = walled_world(gap=True)
    path = GuidingPath.from_vertices([[2.0, 10.0, 2.5], [9.0, 14.0, 2.5], [11.0, 14.0, 2.5], [18.0, 10.0, 2.5]])
    p = np.array([9.0, 11.0, 2.5])

    progress = path_progress(path, p)
    gamma, s_gamma = lookahead_point(path, world, p, R_C, progress=progress)
    s, points = lookahead_samples(path, progress, 0.1)
    visible = [i for i, q in enumerate(points) if line_of_sight(world, p, q, R_C)]

    assert s_gamma == pytest.approx(s[max(visible)])
    np.testing.assert_allclose(gamma, points[max(visible)])
    assert s_gamma >= progress


def test_lookahead_falls_back_to_projection():
    world = walled_world(gap=False)
    path = GuidingPath.from_vertices([[9.0, 10.0, 2.5], [18.0, 10.0, 2.5]])
    # Wall face at x = 9.8; with p hugging the wall, no sample is visible
    p = np.array([9.55, 10.0, 2.5])
    gamma, s_gamma = lookahead_point(path, world, p, 0.3)

    assert s_gamma == pytest.approx(path_progress(path, p))
    np.testing.assert_allclose(gamma, path.point_at(s_gamma))


def test_lookahead_samples_include_goal():
    path = GuidingPath.from_vertices([[0, 0, 0], [1.05, 0, 0]])
    s, points = lookahead_samples(path, 0.0, 0.1)
    assert s[-1] == pytest.approx(1.05)
    assert len(s) == 12
    np.testing.assert_allclose(points[-1], [1.05, 0, 0])


def test_guiding_path_validation():
    with pytest.raises(PlannerError):
        GuidingPath.from_vertices([[0, 0, 0]])
    with pytest.raises(PlannerError):
        GuidingPath.from_vertices([[0, 0, 0], [0, 0, 0], [1, 0, 0]])


def test_path_frame_layout():
    path = GuidingPath.from_vertices([[0, 0, 1], [3, 4, 1]])
    frame = path_to_frame(path)

    assert list(frame["t"]) == [0.0, 5.0]
    assert list(frame["px"]) == [0.0, 3.0]
    assert (frame["qw"] == 1.0).all()
