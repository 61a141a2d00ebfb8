"""
Flight Stack - Depth Camera
Pinhole depth rendering by exact ray intersection with spheres, boxes and vertical cylinders

Camera frame: z forward (optical axis), x right, y down. Depth is the distance
along the camera z-axis, so an unnormalized ray (x, y, 1) reaches depth t at
parameter t.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .dynamics import QuadState, quat_multiply, quat_normalize, quat_to_rotation
from .utils import DatasetError, GeometryError
from .world import World

# Body-from-camera rotation of a forward-looking camera: camera z -> body x,
# camera x -> body -y, camera y -> body -z
FORWARD_MOUNT = (0.5, -0.5, 0.5, -0.5)

BLOB_HEADER_BYTES = 8
PGM_MAX_VALUE = 65535


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 64
    height: int = 48
    fov: float = math.pi / 2
    max_range: float = 10.0
    mount: Tuple[float, float, float, float] = FORWARD_MOUNT

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise GeometryError(f"Camera must be at least 8x8 pixels, got {self.width}x{self.height}",
                                primitive="camera")
        if not 0.0 < self.fov < math.pi:
            raise GeometryError(f"Horizontal FOV must be in (0, pi), got {self.fov}", primitive="camera")
        if not self.max_range > 0:
            raise GeometryError(f"Max range must be positive, got {self.max_range}", primitive="camera")

    @classmethod
    def from_config(cls, camera_config) -> "CameraIntrinsics":
        return cls(width=camera_config.width, height=camera_config.height,
                   fov=math.radians(camera_config.fov_deg), max_range=camera_config.max_range)

    @property
    def focal(self) -> float:
        """Focal length in pixels (square pixels)"""
        return (self.width / 2.0) / math.tan(self.fov / 2.0)

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def ray_directions(self) -> np.ndarray:
        """Camera-frame rays (x, y, 1) through every pixel center, row-major, shape (H*W, 3)"""
        u = (np.arange(self.width) + 0.5 - self.width / 2.0) / self.focal
        v = (np.arange(self.height) + 0.5 - self.height / 2.0) / self.focal
        grid_u, grid_v = np.meshgrid(u, v)
        return np.column_stack([grid_u.ravel(), grid_v.ravel(), np.ones(self.pixel_count)])


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Row-major metric depth grid, f32, every value in [0, max_range]"""
    data: np.ndarray
    intrinsics: CameraIntrinsics
    timestamp: float = 0.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


def camera_pose(state: QuadState, intr: CameraIntrinsics) -> Tuple[np.ndarray, np.ndarray]:
    """World position and world-from-camera quaternion of the body-mounted camera"""
    q = quat_normalize(quat_multiply(state.orientation, np.array(intr.mount)))
    return state.position.copy(), q


# ---------------------------------------------------------------------------
# Ray intersections; each returns (t_enter, t_exit), shape (rays, primitives)
# ---------------------------------------------------------------------------

def _slab(origin: np.ndarray, directions: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Interval of t with lo <= o + t d <= hi along one axis"""
    parallel = np.abs(directions) < 1e-15
    safe = np.where(parallel, 1.0, directions)
    t1 = (lo - origin) / safe
    t2 = (hi - origin) / safe
    enter = np.minimum(t1, t2)
    exit_ = np.maximum(t1, t2)
    inside = (origin >= lo) & (origin <= hi)
    enter = np.where(parallel, np.where(inside, -np.inf, np.inf), enter)
    exit_ = np.where(parallel, np.where(inside, np.inf, -np.inf), exit_)
    return enter, exit_


def _intersect_spheres(origin, directions, centers, radii):
    oc = origin - centers                                   # (M, 3)
    a = np.sum(directions * directions, axis=1)[:, None]    # (R, 1)
    b = 2.0 * directions @ oc.T                             # (R, M)
    c = np.sum(oc * oc, axis=1)[None, :] - radii[None, :] ** 2
    disc = b * b - 4.0 * a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    enter = np.where(disc >= 0.0, (-b - root) / (2.0 * a), np.inf)
    exit_ = np.where(disc >= 0.0, (-b + root) / (2.0 * a), -np.inf)
    return enter, exit_


def _intersect_boxes(origin, directions, lo, hi):
    enter = np.full((len(directions), len(lo)), -np.inf)
    exit_ = np.full((len(directions), len(lo)), np.inf)
    for axis in range(3):
        e, x = _slab(origin[axis], directions[:, axis:axis + 1], lo[None, :, axis], hi[None, :, axis])
        enter = np.maximum(enter, e)
        exit_ = np.minimum(exit_, x)
    return enter, exit_


def _intersect_cylinders(origin, directions, centers_xy, radii, z_range):
    oc = origin[:2] - centers_xy                               # (M, 2)
    dxy = directions[:, :2]
    a = np.sum(dxy * dxy, axis=1)[:, None]                     # (R, 1)
    b = 2.0 * dxy @ oc.T                                       # (R, M)
    c = np.sum(oc * oc, axis=1)[None, :] - radii[None, :] ** 2
    vertical = a < 1e-15
    safe_a = np.where(vertical, 1.0, a)
    disc = b * b - 4.0 * safe_a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    enter = np.where(disc >= 0.0, (-b - root) / (2.0 * safe_a), np.inf)
    exit_ = np.where(disc >= 0.0, (-b + root) / (2.0 * safe_a), -np.inf)
    # Rays parallel to the axis hit iff they start inside the circle
    inside_circle = np.broadcast_to(c <= 0.0, enter.shape)
    enter = np.where(vertical, np.where(inside_circle, -np.inf, np.inf), enter)
    exit_ = np.where(vertical, np.where(inside_circle, np.inf, -np.inf), exit_)

    z_enter, z_exit = _slab(origin[2], directions[:, 2:3], z_range[None, :, 0], z_range[None, :, 1])
    return np.maximum(enter, z_enter), np.minimum(exit_, z_exit)


def _first_hit(enter: np.ndarray, exit_: np.ndarray) -> np.ndarray:
    """Nearest non-negative hit per ray; 0 when the origin is inside, inf on a miss"""
    hit = (exit_ >= enter) & (exit_ >= 0.0)
    t = np.where(hit, np.maximum(enter, 0.0), np.inf)
    if t.shape[1] == 0:
        return np.full(t.shape[0], np.inf)
    return t.min(axis=1)


def cast_rays(world: World, origin: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Parameter t of the first obstacle hit for rays o + t d (world frame); inf on a miss"""
    packed = world.packed
    origin = np.asarray(origin, dtype=np.float64)
    t = np.full(len(directions), np.inf)
    if len(packed.sphere_radii):
        t = np.minimum(t, _first_hit(*_intersect_spheres(origin, directions, packed.sphere_centers,
                                                         packed.sphere_radii)))
    if len(packed.box_lo):
        t = np.minimum(t, _first_hit(*_intersect_boxes(origin, directions, packed.box_lo, packed.box_hi)))
    if len(packed.cyl_radii):
        t = np.minimum(t, _first_hit(*_intersect_cylinders(origin, directions, packed.cyl_centers,
                                                           packed.cyl_radii, packed.cyl_z)))
    return t


def render_depth(world: World, pose: Tuple[np.ndarray, np.ndarray], intr: CameraIntrinsics,
                 timestamp: float = 0.0) -> DepthImage:
    """
    Render a metric depth image

    Args:
        world: Scene; only obstacles are rendered, arena walls are not
        pose: (camera position, world-from-camera unit quaternion)
        intr: Camera intrinsics
        timestamp: Stored on the image

    Returns:
        DepthImage with misses at max_range
    """
    position, q = pose
    q = np.asarray(q, dtype=np.float64)
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise GeometryError(f"Camera orientation must be a unit quaternion, got norm {np.linalg.norm(q)}",
                            primitive="camera")
    directions = intr.ray_directions() @ quat_to_rotation(q).T
    depth = cast_rays(world, np.asarray(position, dtype=np.float64), directions)
    depth = np.minimum(depth, intr.max_range).reshape(intr.height, intr.width)
    return DepthImage(data=depth.astype(np.float32), intrinsics=intr, timestamp=float(timestamp))


def render_from_state(world: World, state: QuadState, intr: CameraIntrinsics) -> DepthImage:
    return render_depth(world, camera_pose(state, intr), intr, timestamp=state.time)


def normalize_depth(img: DepthImage) -> np.ndarray:
    """Depth divided by max_range, f32 values in [0, 1]"""
    return (img.data / np.float32(img.intrinsics.max_range)).astype(np.float32)


def denormalize_depth(grid: np.ndarray, intr: CameraIntrinsics, timestamp: float = 0.0) -> DepthImage:
    data = (np.asarray(grid, dtype=np.float32) * np.float32(intr.max_range)).astype(np.float32)
    return DepthImage(data=data, intrinsics=intr, timestamp=timestamp)


# ---------------------------------------------------------------------------
# Dump formats
# ---------------------------------------------------------------------------

def save_pgm(img: DepthImage, path: Union[str, Path]) -> Path:
    """16-bit binary PGM, depth quantized linearly over [0, max_range]"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = img.data.shape
    scaled = np.clip(np.rint(img.data.astype(np.float64) / img.intrinsics.max_range * PGM_MAX_VALUE),
                     0, PGM_MAX_VALUE)
    header = f"P5\n{width} {height}\n{PGM_MAX_VALUE}\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(scaled.astype(">u2").tobytes())
    return path


def pack_depth_blob(data: np.ndarray) -> bytes:
    """Little-endian blob: u32 width, u32 height, then row-major f32 depths"""
    data = np.asarray(data, dtype=np.float32)
    height, width = data.shape
    return np.array([width, height], dtype="<u4").tobytes() + data.astype("<f4").tobytes()


def unpack_depth_blob(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """
    Decode one blob starting at ``offset``

    Returns:
        (depth grid (H, W) f32, offset just past the blob)
    """
    if len(buffer) - offset < BLOB_HEADER_BYTES:
        raise DatasetError(f"Depth blob header truncated at offset {offset}")
    width, height = np.frombuffer(buffer, dtype="<u4", count=2, offset=offset)
    size = int(width) * int(height) * 4
    start = offset + BLOB_HEADER_BYTES
    if len(buffer) - start < size:
        raise DatasetError(f"Depth blob at offset {offset} truncated: need {size} bytes")
    data = np.frombuffer(buffer, dtype="<f4", count=int(width) * int(height), offset=start)
    return data.reshape(int(height), int(width)).astype(np.float32), start + size


def save_depth_blob(img: DepthImage, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_depth_blob(img.data))
    return path


def load_depth_blob(path: Union[str, Path]) -> np.ndarray:
    data, _ = unpack_depth_blob(Path(path).read_bytes())
    return data
