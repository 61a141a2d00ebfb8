"""
Flight Stack - Depth Camera Tests
"""

import math

import numpy as np
import pytest

from src.depthcam import (
    FORWARD_MOUNT,
    CameraIntrinsics,
    DepthImage,
    camera_pose,
    denormalize_depth,
    load_depth_blob,
    normalize_depth,
    pack_depth_blob,
    render_depth,
    render_from_state,
    save_depth_blob,
    save_pgm,
    unpack_depth_blob,
)
from src.dynamics import QuadState, quat_to_rotation
from src.utils import DatasetError, GeometryError
from src.world import Sphere, obstacle_clearance, open_world

ODD_CAMERA = CameraIntrinsics(width=65, height=49)


def sphere_trace(world, origin: np.ndarray, direction: np.ndarray, max_distance: float):
    """Distance along a unit direction to the first surface; None when it does not settle"""
    t = 0.0
    for _ in range(5000):
        d = obstacle_clearance(world, origin + t * direction)
        if d < 1e-9:
            return t
        t += d
        if t > max_distance:
            return math.inf
    return None


def test_empty_world_renders_max_range(open_arena, small_camera):
    img = render_from_state(open_arena, QuadState.hover([10.0, 10.0, 2.0]), small_camera)
    assert img.data.shape == (24, 24)
    assert img.data.dtype == np.float32
    assert np.all(img.data == small_camera.max_range)


def test_center_pixel_sees_sphere_front():
    camera = np.array([2.0, 10.0, 2.5])
    world = open_world(obstacles=(Sphere(center=tuple(camera + [5.0, 0.0, 0.0]), radius=1.0),))
    img = render_depth(world, (camera, np.array(FORWARD_MOUNT)), ODD_CAMERA)

    assert img.data[24, 32] == pytest.approx(4.0, abs=1e-6)
    assert img.data[0, 0] == ODD_CAMERA.max_range


def test_center_row_matches_sphere_tracing(cluttered_world):
    state = QuadState.hover([2.0, 9.0, 1.5], yaw=0.15)
    img = render_from_state(cluttered_world, state, ODD_CAMERA)
    _, q = camera_pose(state, ODD_CAMERA)
    rotation = quat_to_rotation(q)

    row = ODD_CAMERA.height // 2
    rays = ODD_CAMERA.ray_directions().reshape(ODD_CAMERA.height, ODD_CAMERA.width, 3)[row]
    compared = 0
    for col, ray in enumerate(rays):
        length = np.linalg.norm(ray)
        distance = sphere_trace(cluttered_world, state.position, rotation @ ray / length,
                                ODD_CAMERA.max_range * length)
        if distance is None:
            continue
        expected = min(distance / length, ODD_CAMERA.max_range)
        assert img.data[row, col] == pytest.approx(expected, abs=1e-5)
        compared += 1
    assert compared > 50
    assert np.any(img.data[row] < ODD_CAMERA.max_range)


def test_hit_depth_respects_camera_clearance(cluttered_world, small_camera, rng):
    for _ in range(5):
        position = rng.uniform([1.0, 1.0, 0.5], [19.0, 19.0, 4.5])
        if obstacle_clearance(cluttered_world, position) < 0.2:
            continue
        state = QuadState.hover(position, yaw=rng.uniform(-math.pi, math.pi))
        img = render_from_state(cluttered_world, state, small_camera)
        ray_lengths = np.linalg.norm(small_camera.ray_directions(), axis=1).reshape(img.data.shape)
        hits = img.data < small_camera.max_range
        assert np.all(img.data[hits] * ray_lengths[hits] >= obstacle_clearance(cluttered_world, position) - 1e-5)


def test_render_values_finite_and_in_range(cluttered_world, small_camera):
    img = render_from_state(cluttered_world, QuadState.hover([3.0, 10.0, 1.5]), small_camera)
    assert np.all(np.isfinite(img.data))
    assert np.all((img.data >= 0.0) & (img.data <= small_camera.max_range))


def test_camera_inside_obstacle_sees_zero(small_camera):
    world = open_world(obstacles=(Sphere(center=(10.0, 10.0, 2.5), radius=1.0),))
    img = render_from_state(world, QuadState.hover([10.0, 10.0, 2.5]), small_camera)
    assert np.all(img.data == 0.0)


def test_render_is_deterministic(cluttered_world, small_camera):
    state = QuadState.hover([3.0, 10.0, 1.5], yaw=0.4, time=1.25)
    first = render_from_state(cluttered_world, state, small_camera)
    second = render_from_state(cluttered_world, state, small_camera)
    assert np.array_equal(first.data, second.data)
    assert first.timestamp == 1.25


def test_render_rejects_non_unit_quaternion(open_arena, small_camera):
    with pytest.raises(GeometryError):
        render_depth(open_arena, (np.zeros(3), np.array([1.0, 1.0, 0.0, 0.0])), small_camera)


def test_intrinsics_validation():
    with pytest.raises(GeometryError):
        CameraIntrinsics(width=7, height=48)
    with pytest.raises(GeometryError):
        CameraIntrinsics(fov=math.pi)
    with pytest.raises(GeometryError):
        CameraIntrinsics(max_range=0.0)
    assert CameraIntrinsics().focal == pytest.approx(32.0)


def test_normalize_depth_cases(small_camera):
    data = np.full((24, 24), small_camera.max_range, dtype=np.float32)
    data[0, 0] = 0.0
    data[3, 4] = 2.5
    grid = normalize_depth(DepthImage(data, small_camera))

    assert grid[0, 0] == 0.0
    assert grid[3, 4] == pytest.approx(0.25)
    assert np.all(np.delete(grid.ravel(), [0, 3 * 24 + 4]) == 1.0)
    np.testing.assert_allclose(denormalize_depth(grid, small_camera).data, data, rtol=1e-6, atol=1e-7)


def test_depth_blob_layout_and_truncation(tmp_path, small_camera, rng):
    data = rng.uniform(0.0, 10.0, size=(24, 24)).astype(np.float32)
    blob = pack_depth_blob(data)

    assert len(blob) == 8 + 24 * 24 * 4
    assert blob[:8] == (24).to_bytes(4, "little") + (24).to_bytes(4, "little")
    decoded, end = unpack_depth_blob(blob + blob, offset=len(blob))
    assert end == 2 * len(blob)
    assert np.array_equal(decoded, data)

    with pytest.raises(DatasetError):
        unpack_depth_blob(blob[:-1])
    with pytest.raises(DatasetError):
        unpack_depth_blob(blob[:5])

    path = save_depth_blob(DepthImage(data, small_camera), tmp_path / "frame.bin")
    assert np.array_equal(load_depth_blob(path), data)


def test_pgm_dump(tmp_path, small_camera):
    data = np.full((24, 24), small_camera.max_range, dtype=np.float32)
    data[0, 0] = 0.0
    path = save_pgm(DepthImage(data, small_camera), tmp_path / "frame.pgm")

    raw = path.read_bytes()
    header = b"P5\n24 24\n65535\n"
    assert raw.startswith(header)
    pixels = np.frombuffer(raw[len(header):], dtype=">u2")
    assert pixels[0] == 0
    assert pixels[1] == 65535
