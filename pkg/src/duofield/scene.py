"""Synthetic dynamic scenes with exact ground truth.

A scene is a handful of axis-aligned boxes and spheres over a checkered
ground plane, some of them moving along per-frame trajectories, under a
constant-color sky.  Every frame can be rasterized analytically (closed-form
ray/primitive intersections, no sampling), which makes the renders usable
as an oracle: color, depth, semantics and the motion mask are exact.

World conventions: y is up, the ground plane sits at a fixed height, all
geometry lives inside an axis-aligned bounding box.  Depth images use 0 as
the "no supervision" sentinel (sky pixels).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from duofield import ioutil
from duofield.rng import substream

PATCH_SIZE = 15

# Class ids are fixed across all bundled scenes.
CLASS_SKY = 0
CLASS_ROAD = 1
CLASS_BACKGROUND = 2
CLASS_VEHICLE = 3

_EPS_T = 1e-9

# Flat per-face brightness so box faces are distinguishable without shading.
_FACE_GAIN = np.array([0.88, 1.0, 0.76])


class SceneConfigError(Exception):
    """Unknown scene name or invalid scene construction parameters."""


@dataclass(frozen=True)
class SemanticClass:
    name: str
    movable: bool


@dataclass(frozen=True)
class Camera:
    """Pinhole camera.

    ``orientation`` columns are the camera's right / up / forward axes in
    world coordinates.  Pixel (row, col) maps to the image-plane point
    ((col - W/2) / focal, -(row - H/2) / focal) in front of the camera, so
    column W/2 of an even-width image lies exactly on the optical axis and
    the outermost column spans tan(half-angle) = (W/2) / focal.
    """

    position: np.ndarray
    orientation: np.ndarray
    focal: float
    resolution: tuple[int, int]  # (width, height)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=np.float64))
        R = self.orientation
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise SceneConfigError("camera orientation must be orthonormal")
        if self.focal <= 0:
            raise SceneConfigError("focal length must be positive")
        w, h = self.resolution
        if w < PATCH_SIZE or h < PATCH_SIZE:
            raise SceneConfigError(f"resolution must be at least {PATCH_SIZE}x{PATCH_SIZE}")

    @staticmethod
    def look_at(position, target, focal: float, resolution: tuple[int, int],
                up=(0.0, 1.0, 0.0)) -> "Camera":
        position = np.asarray(position, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - position
        forward = forward / np.linalg.norm(forward)
        right = np.cross(np.asarray(up, dtype=np.float64), forward)
        right = right / np.linalg.norm(right)
        cam_up = np.cross(forward, right)
        R = np.stack([right, cam_up, forward], axis=1)
        return Camera(position, R, focal, resolution)

    def pixel_directions(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Unit world-space directions for integer pixel coordinates."""
        w, h = self.resolution
        u = (np.asarray(cols, dtype=np.float64) - w / 2.0) / self.focal
        v = -(np.asarray(rows, dtype=np.float64) - h / 2.0) / self.focal
        d_cam = np.stack([u, v, np.ones_like(u)], axis=-1)
        d_world = d_cam @ self.orientation.T
        return d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    timestamp: float
    pixel: tuple[int, int]  # (row, col)
    frame_index: int

    def __post_init__(self):
        if not 0.0 <= self.timestamp <= 1.0:
            raise ValueError("ray timestamp must lie in [0, 1]")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")


def generate_ray(camera: Camera, row: int, col: int, timestamp: float,
                 frame_index: int = 0) -> Ray:
    """Ray through pixel (row, col) of ``camera`` at the given timestamp."""
    w, h = camera.resolution
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"pixel ({row}, {col}) outside {w}x{h} image")
    direction = camera.pixel_directions(np.array([row]), np.array([col]))[0]
    return Ray(camera.position.copy(), direction, float(timestamp), (row, col), frame_index)


# ---------------------------------------------------------------------------
# Primitives


@dataclass(frozen=True)
class BoxShape:
    size: np.ndarray  # full side lengths
    color: np.ndarray
    semantic: int

    def __post_init__(self):
        object.__setattr__(self, "size", np.asarray(self.size, dtype=np.float64))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))


@dataclass(frozen=True)
class SphereShape:
    radius: float
    color: np.ndarray
    semantic: int

    def __post_init__(self):
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))


@dataclass(frozen=True)
class StaticPrimitive:
    shape: BoxShape | SphereShape
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))


@dataclass(frozen=True)
class DynamicPrimitive:
    """A primitive with one pose per frame and an optional cast shadow.

    The shadow is a disc of ``shadow_radius`` on the ground plane directly
    below the primitive's center, darkening the ground color by
    ``shadow_factor``.
    """

    shape: BoxShape | SphereShape
    centers: np.ndarray  # (num_frames, 3)
    shadow_radius: float = 0.0
    shadow_factor: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=np.float64))

    @property
    def has_shadow(self) -> bool:
        return self.shadow_radius > 0.0


@dataclass(frozen=True)
class GroundPlane:
    height: float
    color_a: np.ndarray
    color_b: np.ndarray
    checker_period: float
    semantic: int = CLASS_ROAD

    def __post_init__(self):
        object.__setattr__(self, "color_a", np.asarray(self.color_a, dtype=np.float64))
        object.__setattr__(self, "color_b", np.asarray(self.color_b, dtype=np.float64))


def _intersect_box(origins, dirs, lo, hi):
    """Slab test. Returns (t, axis) with t = +inf on miss.

    ``axis`` is the index of the slab that produced the entry point, used
    for per-face coloring.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.where(dirs == 0.0, 1e-300, dirs)
    t1 = (lo - origins) * inv
    t2 = (hi - origins) * inv
    t_lo = np.minimum(t1, t2)
    t_hi = np.maximum(t1, t2)
    axis = np.argmax(t_lo, axis=-1)
    t_near = np.max(t_lo, axis=-1)
    t_far = np.min(t_hi, axis=-1)
    hit = (t_far >= t_near) & (t_far > _EPS_T)
    t = np.where(t_near > _EPS_T, t_near, t_far)  # t_far covers origins inside the box
    return np.where(hit, t, np.inf), axis


def _intersect_sphere(origins, dirs, center, radius):
    oc = origins - center
    b = np.sum(dirs * oc, axis=-1)
    c = np.sum(oc * oc, axis=-1) - radius * radius
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        root = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - root
    t1 = -b + root
    t = np.where(t0 > _EPS_T, t0, t1)
    return np.where((disc >= 0.0) & (t > _EPS_T), t, np.inf)


def _intersect_ground(origins, dirs, height, extent):
    dy = dirs[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (height - origins[..., 1]) / np.where(dy == 0.0, 1e-300, dy)
    px = origins[..., 0] + t * dirs[..., 0]
    pz = origins[..., 2] + t * dirs[..., 2]
    inside = (np.abs(px) <= extent) & (np.abs(pz) <= extent)
    return np.where((t > _EPS_T) & inside, t, np.inf)


def _shape_hit(shape, center, origins, dirs):
    """Intersection and flat color for one primitive at one pose."""
    if isinstance(shape, BoxShape):
        lo = center - shape.size / 2.0
        hi = center + shape.size / 2.0
        t, axis = _intersect_box(origins, dirs, lo, hi)
        color = shape.color[None, :] * _FACE_GAIN[axis][..., None]
        return t, color
    t = _intersect_sphere(origins, dirs, center, shape.radius)
    return t, np.broadcast_to(shape.color, origins.shape).copy()


# ---------------------------------------------------------------------------
# Scene


@dataclass
class SyntheticScene:
    """A fully specified world: geometry, trajectories, cameras, timestamps."""

    name: str
    seed: int
    static_primitives: list[StaticPrimitive]
    dynamic_primitives: list[DynamicPrimitive]
    ground_plane: GroundPlane
    sky_color: np.ndarray
    frames: np.ndarray  # normalized timestamps, ordered
    cameras: list[Camera]  # one per frame
    class_table: list[SemanticClass]
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    near: float = 0.05
    _frame_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.sky_color = np.asarray(self.sky_color, dtype=np.float64)
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.bounds_lo = np.asarray(self.bounds_lo, dtype=np.float64)
        self.bounds_hi = np.asarray(self.bounds_hi, dtype=np.float64)
        if len(self.cameras) != self.num_frames:
            raise SceneConfigError("need exactly one camera per frame")
        for prim in self.dynamic_primitives:
            if prim.centers.shape != (self.num_frames, 3):
                raise SceneConfigError("dynamic primitive needs one pose per frame")
        names = [c.name for c in self.class_table]
        for required in ("sky", "road", "background", "vehicle"):
            if required not in names:
                raise SceneConfigError(f"class table missing {required!r}")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def num_classes(self) -> int:
        return len(self.class_table)

    @property
    def movable_mask(self) -> np.ndarray:
        return np.array([c.movable for c in self.class_table], dtype=bool)

    @property
    def far(self) -> float:
        return float(np.linalg.norm(self.bounds_hi - self.bounds_lo))

    def ground_truth(self, frame: int):
        """Cached rasterization of one frame (images are read-only)."""
        if frame not in self._frame_cache:
            self._frame_cache[frame] = rasterize_ground_truth(self, frame)
        return self._frame_cache[frame]


def rasterize_ground_truth(scene: SyntheticScene, frame: int):
    """Exact per-pixel render of one frame.

    Returns (color, depth, semantics, motion_mask, sky_mask, road_mask).
    Depth is the Euclidean first-hit distance, 0 on sky pixels.  The motion
    mask marks pixels whose first hit is a dynamic primitive or falls inside
    a dynamic primitive's cast shadow on the ground.
    """
    if not 0 <= frame < scene.num_frames:
        raise ValueError(f"frame {frame} out of range")
    camera = scene.cameras[frame]
    w, h = camera.resolution
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dirs = camera.pixel_directions(rows.ravel(), cols.ravel())
    origins = np.broadcast_to(camera.position, dirs.shape)

    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    color = np.tile(scene.sky_color, (n, 1))
    semantics = np.full(n, CLASS_SKY, dtype=np.int64)
    dynamic_hit = np.zeros(n, dtype=bool)
    ground_hit = np.zeros(n, dtype=bool)

    def consider(t, prim_color, prim_class, is_dynamic, is_ground=False):
        nonlocal best_t
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        color[closer] = prim_color[closer]
        semantics[closer] = prim_class
        dynamic_hit[closer] = is_dynamic
        ground_hit[closer] = is_ground

    gp = scene.ground_plane
    extent = float(scene.bounds_hi[0])
    t_ground = _intersect_ground(origins, dirs, gp.height, extent)
    px = origins[:, 0] + t_ground * dirs[:, 0]
    pz = origins[:, 2] + t_ground * dirs[:, 2]
    with np.errstate(invalid="ignore"):
        checker = (np.floor(px / gp.checker_period) + np.floor(pz / gp.checker_period)) % 2
    ground_color = np.where(checker[:, None] == 0, gp.color_a[None, :], gp.color_b[None, :])
    consider(t_ground, ground_color, gp.semantic, False, is_ground=True)

    for prim in scene.static_primitives:
        t, c = _shape_hit(prim.shape, prim.center, origins, dirs)
        consider(t, c, prim.shape.semantic, False)

    for prim in scene.dynamic_primitives:
        t, c = _shape_hit(prim.shape, prim.centers[frame], origins, dirs)
        consider(t, c, prim.shape.semantic, True)

    # Cast shadows darken ground pixels and count as motion.
    shadow_hit = np.zeros(n, dtype=bool)
    hit_x = origins[:, 0] + best_t * dirs[:, 0]
    hit_z = origins[:, 2] + best_t * dirs[:, 2]
    for prim in scene.dynamic_primitives:
        if not prim.has_shadow:
            continue
        cx, _, cz = prim.centers[frame]
        with np.errstate(invalid="ignore"):
            inside = (hit_x - cx) ** 2 + (hit_z - cz) ** 2 <= prim.shadow_radius**2
        shadowed = ground_hit & inside
        color[shadowed] *= prim.shadow_factor
        shadow_hit |= shadowed

    sky_mask = ~np.isfinite(best_t)
    depth = np.where(sky_mask, 0.0, best_t)
    motion_mask = dynamic_hit | shadow_hit
    road_mask = semantics == CLASS_ROAD

    shape2 = (h, w)
    return (
        color.reshape(h, w, 3),
        depth.reshape(shape2),
        semantics.reshape(shape2),
        motion_mask.reshape(shape2),
        sky_mask.reshape(shape2),
        road_mask.reshape(shape2),
    )


# ---------------------------------------------------------------------------
# Patches


@dataclass(frozen=True)
class Patch:
    """A PxP pixel block of one frame with its ground truth.

    Rays are stored as vectorized origin/direction grids; ``ray(i, j)``
    materializes a single :class:`Ray` when object form is needed.
    """

    frame_index: int
    timestamp: float
    row0: int
    col0: int
    origins: np.ndarray  # (P, P, 3)
    directions: np.ndarray  # (P, P, 3)
    gt_color: np.ndarray  # (P, P, 3)
    gt_depth: np.ndarray  # (P, P)
    gt_semantics: np.ndarray  # (P, P)
    sky_mask: np.ndarray
    road_mask: np.ndarray
    motion_mask: np.ndarray

    @property
    def size(self) -> int:
        return self.origins.shape[0]

    def ray(self, i: int, j: int) -> Ray:
        return Ray(self.origins[i, j], self.directions[i, j], self.timestamp,
                   (self.row0 + i, self.col0 + j), self.frame_index)


def sample_patches(scene: SyntheticScene, batch_size: int,
                   rng: np.random.Generator | int) -> list[Patch]:
    """Draw ``batch_size`` patches uniformly over (frame, position).

    Patches are axis-aligned PxP blocks placed fully inside of the image,
    so border pixels are drawn slightly less often than interior ones.
    Accepts either a generator (consumed in place) or an integer seed.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(rng))))
    p = PATCH_SIZE
    patches = []
    for _ in range(batch_size):
        frame = int(rng.integers(scene.num_frames))
        camera = scene.cameras[frame]
        w, h = camera.resolution
        r0 = int(rng.integers(h - p + 1))
        c0 = int(rng.integers(w - p + 1))
        patches.append(extract_patch(scene, frame, r0, c0))
    return patches


def extract_patch(scene: SyntheticScene, frame: int, row0: int, col0: int) -> Patch:
    camera = scene.cameras[frame]
    p = PATCH_SIZE
    rows, cols = np.meshgrid(np.arange(row0, row0 + p), np.arange(col0, col0 + p),
                             indexing="ij")
    dirs = camera.pixel_directions(rows, cols)
    origins = np.broadcast_to(camera.position, dirs.shape).copy()
    color, depth, sem, motion, sky, road = scene.ground_truth(frame)
    sl = (slice(row0, row0 + p), slice(col0, col0 + p))
    return Patch(
        frame_index=frame,
        timestamp=float(scene.frames[frame]),
        row0=row0,
        col0=col0,
        origins=origins,
        directions=dirs,
        gt_color=color[sl].copy(),
        gt_depth=depth[sl].copy(),
        gt_semantics=sem[sl].copy(),
        sky_mask=sky[sl].copy(),
        road_mask=road[sl].copy(),
        motion_mask=motion[sl].copy(),
    )


# ---------------------------------------------------------------------------
# Bundled scenes

_DEFAULT_CLASSES = [
    SemanticClass("sky", False),
    SemanticClass("road", False),
    SemanticClass("background", False),
    SemanticClass("vehicle", True),
]

_BOUND = 4.0
_RESOLUTION = (48, 48)
_FOCAL = 40.0


def _jitter(rng, scale):
    return rng.uniform(-scale, scale)


def _camera_path(rng, num_frames, drift=0.6, resolution=_RESOLUTION):
    """Gentle lateral dolly looking at a fixed target above the ground."""
    xs = np.linspace(-drift, drift, num_frames) if num_frames > 1 else np.zeros(1)
    target = np.array([0.0, 0.7 + _jitter(rng, 0.05), 1.4])
    cams = []
    for x in xs:
        pos = np.array([x, 1.6 + _jitter(rng, 0.02), -3.6])
        cams.append(Camera.look_at(pos, target, _FOCAL, resolution))
    return cams


def _ground(rng):
    base = 0.42 + _jitter(rng, 0.03)
    return GroundPlane(
        height=0.0,
        color_a=np.array([base, base, base + 0.02]),
        color_b=np.array([base + 0.18, base + 0.18, base + 0.16]),
        checker_period=1.3,
    )


def _static_set(rng):
    """Two boxes and a sphere forming the persistent background."""
    prims = [
        StaticPrimitive(
            BoxShape(size=(1.3, 1.5, 1.1),
                     color=(0.75 + _jitter(rng, 0.05), 0.3, 0.25),
                     semantic=CLASS_BACKGROUND),
            center=(-1.9 + _jitter(rng, 0.1), 0.75, 2.3),
        ),
        StaticPrimitive(
            BoxShape(size=(1.0, 1.1, 0.9),
                     color=(0.25, 0.62 + _jitter(rng, 0.05), 0.3),
                     semantic=CLASS_BACKGROUND),
            center=(1.8 + _jitter(rng, 0.1), 0.55, 2.6),
        ),
        StaticPrimitive(
            SphereShape(radius=0.55,
                        color=(0.8, 0.72 + _jitter(rng, 0.05), 0.2),
                        semantic=CLASS_BACKGROUND),
            center=(0.15 + _jitter(rng, 0.1), 0.55, 3.0),
        ),
    ]
    return prims


def _linear_track(rng, num_frames, start, end, height, z):
    xs = np.linspace(start, end, num_frames)
    z = z + _jitter(rng, 0.08)
    return np.stack([xs, np.full(num_frames, height), np.full(num_frames, z)], axis=1)


def _build_static_only(rng, num_frames=8):
    return dict(
        static_primitives=_static_set(rng),
        dynamic_primitives=[],
        num_frames=num_frames,
        drift=0.6,
    )


def _build_moving_box(rng, num_frames=8):
    box = BoxShape(size=(1.0, 0.62, 0.62),
                   color=(0.2, 0.32, 0.85 + _jitter(rng, 0.05)),
                   semantic=CLASS_VEHICLE)
    track = _linear_track(rng, num_frames, -2.1, 2.1, height=0.31, z=1.0)
    return dict(
        static_primitives=_static_set(rng),
        dynamic_primitives=[DynamicPrimitive(box, track)],
        num_frames=num_frames,
        drift=0.6,
    )


def _build_two_cars(rng, num_frames=10):
    car_a = BoxShape(size=(1.0, 0.55, 0.55), color=(0.9, 0.55, 0.1),
                     semantic=CLASS_VEHICLE)
    car_b = BoxShape(size=(0.9, 0.5, 0.5), color=(0.55, 0.1, 0.6),
                     semantic=CLASS_VEHICLE)
    track_a = _linear_track(rng, num_frames, -2.3, 2.3, height=0.28, z=0.8)
    track_b = _linear_track(rng, num_frames, 2.3, -2.3, height=0.25, z=1.7)
    return dict(
        static_primitives=_static_set(rng),
        dynamic_primitives=[DynamicPrimitive(car_a, track_a),
                            DynamicPrimitive(car_b, track_b)],
        num_frames=num_frames,
        drift=0.0,
    )


def _build_shadow_caster(rng, num_frames=8):
    ball = SphereShape(radius=0.5, color=(0.15, 0.75, 0.8 + _jitter(rng, 0.05)),
                       semantic=CLASS_VEHICLE)
    track = _linear_track(rng, num_frames, -1.8, 1.8, height=1.05, z=1.2)
    prim = DynamicPrimitive(ball, track, shadow_radius=0.7, shadow_factor=0.4)
    return dict(
        static_primitives=_static_set(rng),
        dynamic_primitives=[prim],
        num_frames=num_frames,
        drift=0.6,
    )


_SCENE_BUILDERS = {
    "static-only": _build_static_only,
    "moving-box": _build_moving_box,
    "two-cars": _build_two_cars,
    "shadow-caster": _build_shadow_caster,
}

SCENE_NAMES = tuple(sorted(_SCENE_BUILDERS))


def generate_scene(spec_name: str, seed: int) -> SyntheticScene:
    """Build a bundled scene; deterministic in (spec_name, seed)."""
    if spec_name not in _SCENE_BUILDERS:
        raise SceneConfigError(
            f"unknown scene {spec_name!r}; available: {', '.join(SCENE_NAMES)}")
    rng = substream(seed, "scene")
    parts = _SCENE_BUILDERS[spec_name](rng)
    num_frames = parts["num_frames"]
    frames = np.linspace(0.0, 1.0, num_frames) if num_frames > 1 else np.zeros(1)
    cameras = _camera_path(rng, num_frames, drift=parts["drift"])
    sky = np.array([0.55, 0.72, 0.92]) + _jitter(rng, 0.02)
    return SyntheticScene(
        name=spec_name,
        seed=seed,
        static_primitives=parts["static_primitives"],
        dynamic_primitives=parts["dynamic_primitives"],
        ground_plane=_ground(rng),
        sky_color=np.clip(sky, 0.0, 1.0),
        frames=frames,
        cameras=cameras,
        class_table=list(_DEFAULT_CLASSES),
        bounds_lo=np.array([-_BOUND, 0.0, -_BOUND]),
        bounds_hi=np.array([_BOUND, _BOUND, _BOUND]),
    )


def export_ground_truth(scene: SyntheticScene, out_dir: str | Path) -> list[Path]:
    """Write per-frame renders, masks, depth and a metadata sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for frame in range(scene.num_frames):
        color, depth, sem, motion, sky, road = scene.ground_truth(frame)
        stem = out / f"frame_{frame:03d}"
        ioutil.write_png_color(f"{stem}_color.png", color)
        ioutil.write_png_labels(f"{stem}_semantic.png", sem)
        ioutil.write_png_mask(f"{stem}_motion.png", motion)
        ioutil.write_png_mask(f"{stem}_sky.png", sky)
        ioutil.write_png_mask(f"{stem}_road.png", road)
        ioutil.write_float_map(f"{stem}_depth.duof", depth)
        camera = scene.cameras[frame]
        ioutil.write_json(f"{stem}_meta.json", {
            "scene": scene.name,
            "seed": scene.seed,
            "frame": frame,
            "timestamp": float(scene.frames[frame]),
            "camera": {
                "position": camera.position.tolist(),
                "orientation": camera.orientation.tolist(),
                "focal": camera.focal,
                "resolution": list(camera.resolution),
            },
            "classes": [{"name": c.name, "movable": c.movable} for c in scene.class_table],
            "depth_format": "DUOF v0 (f32le, 0 = no supervision)",
        })
        written.append(stem)
    return written
