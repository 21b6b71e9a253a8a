"""Seeded synthetic scenes with exact instance ground truth.

A scene is a flat ground plane plus boxes and cylinders floated above it,
sampled volumetrically, with per-point embeddings built from per-object
prototype vectors plus Gaussian noise, and image feature grids colored by
object id. The generator emits the same artifacts the real pipeline
consumes: sensor-frame scans along a straight trajectory, poses, point
feature banks, cameras with feature grids, and a ground truth label file
aligned with the aggregated map.

Scenes in pair mode place objects in touching pairs separated by a small
controlled gap; pair members receive near-antipodal prototypes so that
embedding channels carry a strong boundary signal, the way instance
discriminative embeddings behave on real adjacent objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import CameraModel, FeatureMapGrid
from . import io as _io
from .merge import Aabb
from .scene import AggregatedMap, PointCloud, RigidPose, aggregate

TRAJ_MARGIN = 10.0  # trajectory overshoot keeping chunk cubes covering the scene


@dataclass
class SceneSpec:
    """Parameters of one synthetic scene. Same spec, same scene, bit for bit."""

    seed: int = 0
    n_objects: int = 10
    size_range: tuple[float, float] = (1.0, 2.5)
    min_gap: float = 2.0
    extent: tuple[float, float] = (40.0, 12.0)  # ground plane x and y span
    ground_density: float = 60.0  # points per square meter
    object_density: float = 150.0  # points per cubic meter
    base_height: tuple[float, float] = (0.4, 0.8)
    cylinder_fraction: float = 0.3
    embed_dim: int = 16
    embed_noise: float = 0.1
    image_dim: int = 8
    traj_step: float = 2.0
    sensor_height: float = 1.7
    ground_z_jitter: float = 0.01
    pair_gap: float | None = None  # touching-pair mode when set
    gap_grid: float | None = None  # center pair gaps on multiples of this step
    avoid_x: tuple[tuple[float, float], ...] = ()  # keep object boxes out of these x bands
    proto_norm: float = 1.0  # embedding prototype magnitude
    n_cameras: int = 2
    fmap_scale: float = 16.0

    def validate(self) -> None:
        if self.n_objects < 0:
            raise DataError("n_objects must be non-negative")
        if self.size_range[0] <= 0 or self.size_range[1] < self.size_range[0]:
            raise DataError("size_range must be a positive ascending pair")
        if self.min_gap < 0:
            raise DataError("min_gap must be non-negative")
        if self.pair_gap is not None and self.pair_gap <= 0:
            raise DataError("pair_gap must be positive")
        if self.gap_grid is not None and self.gap_grid <= 0:
            raise DataError("gap_grid must be positive")
        if self.proto_norm <= 0:
            raise DataError("proto_norm must be positive")
        for band in self.avoid_x:
            try:
                lo, hi = band
            except TypeError:
                raise DataError("avoid_x must hold (lo, hi) intervals") from None
            if lo >= hi:
                raise DataError("avoid_x bands must be ascending (lo, hi) intervals")
        if self.embed_dim < 2 or self.image_dim < 1:
            raise DataError("embedding dimensions too small")
        if self.base_height[0] < 0.35:
            raise DataError("objects must start at least 0.35 m above ground")


@dataclass
class SyntheticScene:
    spec: SceneSpec
    map: AggregatedMap
    gt_labels: np.ndarray  # aligned with map.cloud
    scans: list[PointCloud]  # sensor frame
    poses: list[RigidPose]
    scan_embeddings: list[np.ndarray]  # aligned with scans
    cameras: list[CameraModel]
    grids: list[FeatureMapGrid]
    object_boxes: list[Aabb]
    prototypes: np.ndarray  # (n_objects + 1, embed_dim), row 0 = ground
    image_prototypes: np.ndarray  # (n_objects + 1, image_dim)


def aabb_gap(a: Aabb, b: Aabb) -> float:
    """Euclidean distance between two boxes (0 when they overlap)."""
    sep = np.maximum(0.0, np.maximum(a.lo - b.hi, b.lo - a.hi))
    return float(np.linalg.norm(sep))


def _sample_box(rng: np.random.Generator, box: Aabb, density: float) -> np.ndarray:
    volume = box.volume
    n = max(30, int(round(volume * density)))
    return rng.uniform(box.lo, box.hi, size=(n, 3))


def _sample_cylinder(rng: np.random.Generator, center_xy: np.ndarray, radius: float,
                     z0: float, z1: float, density: float) -> np.ndarray:
    volume = np.pi * radius * radius * (z1 - z0)
    n = max(30, int(round(volume * density)))
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(z0, z1, n)
    return np.column_stack([center_xy[0] + r * np.cos(ang), center_xy[1] + r * np.sin(ang), z])


def _place_objects(rng: np.random.Generator, spec: SceneSpec) -> list[dict]:
    """Choose object shapes and non-overlapping placements."""
    ex, ey = spec.extent
    objects: list[dict] = []
    boxes: list[Aabb] = []

    def try_place(size: np.ndarray, x_fixed: float | None = None, y_fixed: float | None = None,
                  base: float | None = None) -> dict | None:
        for _ in range(500):
            x = x_fixed if x_fixed is not None else rng.uniform(size[0] / 2, ex - size[0] / 2)
            y = y_fixed if y_fixed is not None else rng.uniform(-ey / 2 + size[1] / 2, ey / 2 - size[1] / 2)
            z0 = base if base is not None else rng.uniform(*spec.base_height)
            lo = np.array([x - size[0] / 2, y - size[1] / 2, z0])
            hi = np.array([x + size[0] / 2, y + size[1] / 2, z0 + size[2]])
            box = Aabb(lo, hi)
            # objects must sit above sampled ground so no grid cell is
            # left with object points only
            inside = lo[0] >= 0 and hi[0] <= ex and lo[1] >= -ey / 2 and hi[1] <= ey / 2
            clear = all(lo[0] > b1 or hi[0] < b0 for b0, b1 in spec.avoid_x)
            if inside and clear and all(aabb_gap(box, other) >= spec.min_gap for other in boxes):
                return {"box": box, "x": x, "y": y, "z0": z0, "size": size}
            if x_fixed is not None:
                return None  # fixed placements get one shot
        return None

    if spec.pair_gap is None:
        for k in range(spec.n_objects):
            size = rng.uniform(spec.size_range[0], spec.size_range[1], 3)
            kind = "cylinder" if rng.uniform() < spec.cylinder_fraction else "box"
            placed = try_place(size)
            if placed is None:
                raise DataError("could not place objects; lower n_objects or densities")
            placed["kind"] = kind
            objects.append(placed)
            boxes.append(placed["box"])
    else:
        if spec.n_objects % 2 != 0:
            raise DataError("pair mode needs an even n_objects")
        for k in range(spec.n_objects // 2):
            size_a = rng.uniform(spec.size_range[0], spec.size_range[1], 3)
            size_b = rng.uniform(spec.size_range[0], spec.size_range[1], 3)
            placed_a = None
            placed_b = None
            for _ in range(500):
                ax = rng.uniform(size_a[0] / 2, ex - size_a[0] / 2)
                if spec.gap_grid is not None:
                    # center the gap on the snapping grid so a downstream
                    # voxel boundary falls mid-gap instead of a cell
                    # swallowing points from both sides
                    mid = ax + size_a[0] / 2 + spec.pair_gap / 2
                    ax += round(mid / spec.gap_grid) * spec.gap_grid - mid
                placed_a = try_place(size_a, x_fixed=ax)
                if placed_a is None:
                    continue
                # partner box sits pair_gap away along +x, same y and base,
                # so the faces across the gap see each other squarely
                bx = placed_a["x"] + size_a[0] / 2 + spec.pair_gap + size_b[0] / 2
                placed_b = try_place(size_b, x_fixed=bx, y_fixed=placed_a["y"], base=placed_a["z0"])
                if placed_b is not None and aabb_gap(placed_a["box"], placed_b["box"]) >= spec.pair_gap * 0.99:
                    break
                placed_b = None
            if placed_a is None or placed_b is None:
                raise DataError("could not place object pairs; lower n_objects or extent use")
            for placed in (placed_a, placed_b):
                placed["kind"] = "box"  # pairs use boxes for a clean gap plane
                objects.append(placed)
                boxes.append(placed["box"])
    return objects


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _prototypes(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    """Per-object unit prototypes; pair partners are near-antipodal."""
    protos = np.zeros((spec.n_objects + 1, spec.embed_dim))
    if spec.pair_gap is None:
        for k in range(1, spec.n_objects + 1):
            protos[k] = _unit(rng, spec.embed_dim)
    else:
        for k in range(spec.n_objects // 2):
            v = _unit(rng, spec.embed_dim)
            w = -v + 0.05 * rng.standard_normal(spec.embed_dim)
            protos[2 * k + 1] = v
            protos[2 * k + 2] = w / np.linalg.norm(w)
    return protos * spec.proto_norm


def _look_at(eye: np.ndarray, target: np.ndarray, focal: float, width: int, height: int) -> CameraModel:
    """Pinhole camera at eye looking toward target (x right, y down, z forward)."""
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    if abs(forward @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.vstack([right, down, forward])
    intr = np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])
    proj = intr @ np.hstack([rot, (-rot @ eye)[:, None]])
    return CameraModel(proj, width, height)


def _render_grids(scene_points: np.ndarray, labels: np.ndarray, cameras: list[CameraModel],
                  image_protos: np.ndarray, scale: float) -> list[FeatureMapGrid]:
    """Color each grid cell by the id of the nearest point falling in it."""
    grids = []
    for cam in cameras:
        rows = int(np.ceil(cam.height / scale))
        cols = int(np.ceil(cam.width / scale))
        values = np.zeros((rows, cols, image_protos.shape[1]))
        depth_buf = np.full((rows, cols), np.inf)
        pixels, depth = cam.project(scene_points)
        ok = (depth > 0)
        ok &= (pixels[:, 0] >= 0) & (pixels[:, 0] < cam.width)
        ok &= (pixels[:, 1] >= 0) & (pixels[:, 1] < cam.height)
        for i in np.flatnonzero(ok):
            r = int(pixels[i, 1] // scale)
            c = int(pixels[i, 0] // scale)
            if depth[i] < depth_buf[r, c]:
                depth_buf[r, c] = depth[i]
                values[r, c] = image_protos[labels[i]]
        grids.append(FeatureMapGrid(values, scale))
    return grids


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Build a deterministic scene from its spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    ex, ey = spec.extent
    objects = _place_objects(rng, spec)

    # ground covers the full extent, objects float above it
    n_ground = max(100, int(round(ex * ey * spec.ground_density)))
    gx = rng.uniform(0.0, ex, n_ground)
    gy = rng.uniform(-ey / 2, ey / 2, n_ground)
    gz = spec.ground_z_jitter * rng.standard_normal(n_ground)
    world = [np.column_stack([gx, gy, gz])]
    labels = [np.zeros(n_ground, dtype=np.int64)]
    boxes: list[Aabb] = []
    for k, obj in enumerate(objects, start=1):
        if obj["kind"] == "cylinder":
            radius = min(obj["size"][0], obj["size"][1]) / 2
            pts = _sample_cylinder(rng, np.array([obj["x"], obj["y"]]), radius,
                                   obj["z0"], obj["z0"] + obj["size"][2], spec.object_density)
        else:
            pts = _sample_box(rng, obj["box"], spec.object_density)
        world.append(pts)
        labels.append(np.full(len(pts), k, dtype=np.int64))
        boxes.append(obj["box"])
    world = np.vstack(world)
    labels = np.concatenate(labels)

    # straight trajectory overshooting the scene so chunks cover everything
    xs = np.arange(-TRAJ_MARGIN, ex + TRAJ_MARGIN + 1e-9, spec.traj_step)
    poses = [RigidPose(np.eye(3), np.array([x, 0.0, spec.sensor_height])) for x in xs]
    traj_x = np.array([p.translation[0] for p in poses])
    scan_of_point = np.argmin(np.abs(world[:, 0][:, None] - traj_x[None, :]), axis=1)

    prototypes = _prototypes(rng, spec)
    image_protos = np.zeros((spec.n_objects + 1, spec.image_dim))
    for k in range(spec.n_objects + 1):
        image_protos[k] = _unit(rng, spec.image_dim)

    scans: list[PointCloud] = []
    scan_embeddings: list[np.ndarray] = []
    scan_labels: list[np.ndarray] = []
    for s, pose in enumerate(poses):
        sel = scan_of_point == s
        # quantize through the storage dtype so the written scans round-trip
        sensor = (world[sel] - pose.translation).astype(np.float32).astype(np.float64)
        lab = labels[sel]
        intensity = (lab.astype(np.float64) + 1.0) / (spec.n_objects + 2)
        scans.append(PointCloud(sensor, intensity))
        emb = prototypes[lab] + spec.embed_noise * rng.standard_normal((sel.sum(), spec.embed_dim))
        scan_embeddings.append(emb)
        scan_labels.append(lab)

    amap = aggregate(scans, poses)
    # map-point labels come from the first source point of each voxel cell;
    # geometry keeps cells label-pure (gaps exceed the cell diagonal)
    concat_labels = np.concatenate(scan_labels)
    k = amap.cloud.n
    first_source = np.full(k, -1, dtype=np.int64)
    first_source[amap.source_to_map[::-1]] = np.arange(len(concat_labels) - 1, -1, -1)
    gt = concat_labels[first_source]

    world_pts = amap.cloud.points
    center = np.array([ex / 2, 0.0, 0.0])
    cameras = []
    if spec.n_cameras >= 1:
        cameras.append(_look_at(np.array([ex / 2, -ey, 6.0]), center, 500.0, 640, 480))
    if spec.n_cameras >= 2:
        cameras.append(_look_at(np.array([ex / 2, ey, 6.0]), center, 500.0, 640, 480))
    for extra in range(2, spec.n_cameras):
        eye = np.array([ex * (extra - 1) / max(1, spec.n_cameras - 2), ey, 8.0])
        cameras.append(_look_at(eye, center, 500.0, 640, 480))
    grids = _render_grids(world_pts, gt, cameras, image_protos, spec.fmap_scale)

    return SyntheticScene(spec, amap, gt, scans, poses, scan_embeddings,
                          cameras, grids, boxes, prototypes, image_protos)


def write_scene(scene: SyntheticScene, outdir) -> dict[str, str]:
    """Write scene artifacts in the formats the pipeline reads."""
    outdir = Path(outdir)
    (outdir / "scans").mkdir(parents=True, exist_ok=True)
    (outdir / "features").mkdir(exist_ok=True)
    (outdir / "grids").mkdir(exist_ok=True)
    for s, (scan, emb) in enumerate(zip(scene.scans, scene.scan_embeddings)):
        _io.write_scan_file(outdir / "scans" / f"{s:06d}.bin", scan.points, scan.intensity)
        _io.write_feature_file(outdir / "features" / f"{s:06d}.aifb", "P", emb)
    _io.write_pose_file(outdir / "poses.txt", [(p.rotation, p.translation) for p in scene.poses])
    _io.write_label_file(outdir / "gt_labels.bin", scene.gt_labels)
    _io.write_camera_file(outdir / "cameras.txt",
                          [(c.projection, c.width, c.height) for c in scene.cameras])
    for g, grid in enumerate(scene.grids):
        _io.write_grid_file(outdir / "grids" / f"{g:06d}.grid", grid.values, grid.fmap_scale)
    meta = {"spec": asdict(scene.spec), "n_map_points": int(scene.map.cloud.n),
            "n_instances": int(scene.gt_labels.max()) if scene.gt_labels.size else 0}
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2))
    return {
        "scans_dir": str(outdir / "scans"),
        "poses_path": str(outdir / "poses.txt"),
        "features_dir": str(outdir / "features"),
        "cameras_path": str(outdir / "cameras.txt"),
        "grids_dir": str(outdir / "grids"),
        "gt_labels_path": str(outdir / "gt_labels.bin"),
    }
