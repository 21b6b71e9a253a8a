"""Scene model: poses, point clouds, map aggregation, and chunking.

A sequence of per-scan point clouds is registered into a single map with
known sensor poses, deduplicated on a coarse voxel grid, and then cut into
overlapping cubic chunks sampled along the trajectory. Chunks carry a
finer voxel downsample used as graph nodes downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError
from .io import read_scan_file
from .validation import check_labels, check_points, check_positive

MAP_VOXEL = 0.05
CHUNK_EDGE = 25.0
CHUNK_STRIDE = 22.0
NCUT_VOXEL = 0.35


@dataclass
class RigidPose:
    """Rigid transform mapping sensor coordinates to world coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(self.rotation).all() or not np.isfinite(self.translation).all():
            raise DataError("pose contains non-finite values")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise DataError(f"rotation is not orthonormal (max deviation {err:.2e})")
        if np.linalg.det(self.rotation) < 0:
            raise DataError("rotation has negative determinant")

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return points @ self.rotation.T + self.translation

    def inverse(self) -> "RigidPose":
        rot = self.rotation.T
        return RigidPose(rot, -rot @ self.translation)


@dataclass
class PointCloud:
    """Points with optional per-point intensity and source scan index."""

    points: np.ndarray
    intensity: np.ndarray | None = None
    scan_index: np.ndarray | None = None

    def __post_init__(self):
        self.points = check_points(self.points)
        n = self.points.shape[0]
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.float64).ravel()
            if self.intensity.shape[0] != n:
                raise DataError("intensity length does not match point count")
            if self.intensity.size and not np.isfinite(self.intensity).all():
                raise DataError("intensity contains non-finite values")
        if self.scan_index is not None:
            self.scan_index = np.asarray(self.scan_index, dtype=np.int32).ravel()
            if self.scan_index.shape[0] != n:
                raise DataError("scan_index length does not match point count")

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass
class AggregatedMap:
    """Deduplicated world-frame map with the trajectory that produced it."""

    cloud: PointCloud
    trajectory: list[RigidPose] = field(default_factory=list)
    # for each concatenated input point, the map point that represents it
    source_to_map: np.ndarray | None = None


@dataclass
class Chunk:
    """Axis-aligned cube of map points plus its graph-scale downsample."""

    center: np.ndarray
    half_extents: np.ndarray
    raw_indices: np.ndarray  # indices into the map cloud
    raw_points: np.ndarray  # map points at raw_indices
    ds_points: np.ndarray  # voxel downsample of raw_points
    raw_to_ds: np.ndarray  # representative ds index per raw point

    @property
    def n_raw(self) -> int:
        return self.raw_points.shape[0]

    @property
    def n_ds(self) -> int:
        return self.ds_points.shape[0]


def load_scan(path) -> PointCloud:
    """Load a single raw scan file into a sensor-frame point cloud."""
    points, intensity = read_scan_file(path)
    return PointCloud(points, intensity)


def voxel_downsample(points: np.ndarray, voxel: float) -> tuple[np.ndarray, np.ndarray]:
    """Centroid-per-voxel downsample.

    Cells are indexed by floor(coordinate / voxel). Output cells are sorted
    lexicographically by (x, y, z) cell key, which fixes the output order
    independent of chunk or scan boundaries.

    Returns (ds_points (k, 3), raw_to_ds (n,)) where raw_to_ds maps every
    input point to its representative downsampled point.
    """
    points = check_points(points)
    voxel = check_positive(voxel, "voxel")
    n = points.shape[0]
    if n == 0:
        return points.reshape(0, 3), np.zeros(0, dtype=np.int64)
    cells = np.floor(points / voxel).astype(np.int64)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    sorted_cells = cells[order]
    boundary = np.ones(n, dtype=bool)
    boundary[1:] = np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)
    group_of_sorted = np.cumsum(boundary) - 1
    k = int(group_of_sorted[-1]) + 1
    starts = np.flatnonzero(boundary)
    sums = np.add.reduceat(points[order], starts, axis=0)
    counts = np.diff(np.append(starts, n))
    ds_points = sums / counts[:, None]
    raw_to_ds = np.empty(n, dtype=np.int64)
    raw_to_ds[order] = group_of_sorted
    assert k == ds_points.shape[0]
    return ds_points, raw_to_ds


def aggregate(scans: list[PointCloud], poses: list[RigidPose], map_voxel: float = MAP_VOXEL) -> AggregatedMap:
    """Register scans with their poses and deduplicate on a voxel grid.

    Each output point is the centroid of one occupied cell. Intensities are
    averaged the same way; scan_index keeps the first contributing scan.
    """
    if len(scans) != len(poses):
        raise DataError(f"{len(scans)} scans but {len(poses)} poses")
    if not scans:
        raise DataError("no scans to aggregate")
    world = []
    intens = []
    scan_ids = []
    for idx, (scan, pose) in enumerate(zip(scans, poses)):
        world.append(pose.apply(scan.points))
        intens.append(scan.intensity if scan.intensity is not None else np.zeros(scan.n))
        scan_ids.append(np.full(scan.n, idx, dtype=np.int32))
    world = np.vstack(world) if world else np.zeros((0, 3))
    intens = np.concatenate(intens)
    scan_ids = np.concatenate(scan_ids)
    if world.shape[0] == 0:
        raise DataError("aggregate produced an empty map")
    ds_points, source_to_map = voxel_downsample(world, map_voxel)
    k = ds_points.shape[0]
    counts = np.bincount(source_to_map, minlength=k)
    mean_intens = np.bincount(source_to_map, weights=intens, minlength=k) / counts
    first_source = np.full(k, -1, dtype=np.int64)
    # walk in reverse so the lowest concatenated index wins
    first_source[source_to_map[::-1]] = np.arange(len(source_to_map) - 1, -1, -1)
    cloud = PointCloud(ds_points, mean_intens, scan_ids[first_source])
    return AggregatedMap(cloud, list(poses), source_to_map)


def _arc_positions(trajectory: list[RigidPose], stride: float) -> np.ndarray:
    """Sample positions along the trajectory polyline every `stride` meters."""
    pts = np.array([p.translation for p in trajectory], dtype=np.float64).reshape(-1, 3)
    if len(pts) == 1:
        return pts.copy()
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    targets = np.arange(0.0, total + 1e-12, stride)
    if targets.size == 0:
        targets = np.array([0.0])
    out = np.empty((targets.size, 3))
    for i, s in enumerate(targets):
        j = int(np.searchsorted(cum, s, side="right")) - 1
        j = min(j, len(seg) - 1)
        frac = 0.0 if seg[j] == 0 else (s - cum[j]) / seg[j]
        out[i] = pts[j] + frac * (pts[j + 1] - pts[j])
    return out


def extract_chunks(amap: AggregatedMap, edge: float = CHUNK_EDGE, stride: float = CHUNK_STRIDE,
                   ncut_voxel: float = NCUT_VOXEL) -> list[Chunk]:
    """Cut the map into overlapping cubes centered along the trajectory.

    Centers are sampled by arc length every `stride` meters, so consecutive
    chunks of edge > stride overlap. Membership uses the closed cube
    |p - center|_inf <= edge / 2. Chunks that contain no points are dropped.
    """
    edge = check_positive(edge, "edge")
    stride = check_positive(stride, "stride")
    if not amap.trajectory:
        raise DataError("map has no trajectory")
    points = amap.cloud.points
    centers = _arc_positions(amap.trajectory, stride)
    half = np.full(3, edge / 2.0)
    chunks = []
    for center in centers:
        inside = np.all(np.abs(points - center) <= half, axis=1)
        raw_indices = np.flatnonzero(inside)
        if raw_indices.size == 0:
            continue
        raw_points = points[raw_indices]
        ds_points, raw_to_ds = voxel_downsample(raw_points, ncut_voxel)
        chunks.append(Chunk(center.copy(), half.copy(), raw_indices, raw_points, ds_points, raw_to_ds))
    return chunks


def transfer_labels(src_points: np.ndarray, src_labels: np.ndarray, dst_points: np.ndarray) -> np.ndarray:
    """Assign each destination point the label of its nearest source point.

    Exact distance ties resolve to the lowest source index.
    """
    src_points = check_points(src_points, allow_empty=False, name="src_points")
    dst_points = check_points(dst_points, name="dst_points")
    src_labels = check_labels(src_labels, n=src_points.shape[0], name="src_labels")
    if dst_points.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(src_points)
    dist, idx = tree.query(dst_points, k=1)
    out = src_labels[idx].copy()
    # re-resolve candidates that may have equidistant sources
    tol = 1e-9 * np.maximum(1.0, dist)
    groups = tree.query_ball_point(dst_points, dist + tol)
    for i, cand in enumerate(groups):
        if len(cand) > 1:
            d = np.linalg.norm(src_points[cand] - dst_points[i], axis=1)
            dmin = d.min()
            best = min(c for c, dc in zip(cand, d) if dc <= dmin + tol[i])
            out[i] = src_labels[best]
    return out
