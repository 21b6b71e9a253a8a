"""Per-point feature channels and the machinery that fills them.

Three channel kinds feed the similarity graph: S (spatial coordinates),
P (point embeddings averaged from per-scan feature banks), and I (image
features gathered through camera visibility). P and I entries can be
absent, encoded as all-NaN rows; absent entries simply drop out of the
edge weight product.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DataError
from . import io as _io
from .validation import check_points, check_positive

CHANNEL_KINDS = ("S", "P", "I")
POINT_FEATURE_RADIUS = 0.35


@dataclass
class FeatureChannel:
    """A bank of per-point vectors with the similarity bandwidth theta.

    Rows that are entirely NaN mark points without a value in this
    channel. theta may be None for freshly loaded banks; it must be set
    before the channel enters graph construction.
    """

    kind: str
    vectors: np.ndarray
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise DataError(f"unknown channel kind {self.kind!r}")
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DataError(f"channel vectors must be 2-d, got shape {self.vectors.shape}")
        if self.vectors.shape[1] == 0:
            raise DataError("channel dimension must be positive")
        finite = np.isfinite(self.vectors)
        rows_ok = finite.all(axis=1) | (~finite).all(axis=1)
        if not rows_ok.all():
            raise DataError("channel rows must be fully present or fully NaN")
        if np.isinf(self.vectors).any():
            raise DataError("channel contains infinities")
        if self.theta is not None:
            self.theta = check_positive(self.theta, "theta")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.vectors).all(axis=1)

    def with_theta(self, theta: float) -> "FeatureChannel":
        return replace(self, theta=theta)


def spatial_channel(points: np.ndarray, theta: float = 1.0) -> FeatureChannel:
    """The S channel: point coordinates themselves."""
    return FeatureChannel("S", check_points(points), theta)


def load_feature_file(path) -> tuple[int, FeatureChannel]:
    """Load a P or I feature bank; theta is left unset."""
    kind, vectors = _io.read_feature_file(path)
    return vectors.shape[0], FeatureChannel(kind, vectors, None)


def write_feature_file(path, channel: FeatureChannel) -> None:
    _io.write_feature_file(path, channel.kind, channel.vectors)


# ---------------------------------------------------------------------------
# hidden point removal


def _extreme_points(points: np.ndarray) -> np.ndarray:
    """Boolean mask of convex hull extreme points, degenerate ranks included."""
    m = points.shape[0]
    if m <= 2:
        return np.ones(m, dtype=bool)
    center = points.mean(axis=0)
    centered = points - center
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    scale = float(svals[0]) if svals.size else 0.0
    if scale <= 0.0:
        # every point coincides: nothing is interior
        return np.ones(m, dtype=bool)
    rank = int((svals > 1e-9 * scale).sum())
    for dim in range(min(rank, points.shape[1]), 1, -1):
        coords = centered @ vt[:dim].T
        try:
            hull = ConvexHull(coords)
        except QhullError:
            continue
        mask = np.zeros(m, dtype=bool)
        mask[hull.vertices] = True
        return mask
    # collinear: extremes of the 1-d parameterization
    t = centered @ vt[0]
    tol = 1e-12 * scale
    return (t <= t.min() + tol) | (t >= t.max() - tol)


def hidden_point_removal(points: np.ndarray, viewpoint, gamma: float) -> np.ndarray:
    """Visibility of points from a viewpoint by spherical flipping.

    Each point is reflected about the sphere of radius gamma times the
    largest viewpoint distance; a point is visible iff its reflection is an
    extreme point of the convex hull of all reflections plus the viewpoint.
    """
    points = check_points(points, allow_empty=False)
    viewpoint = np.asarray(viewpoint, dtype=np.float64).reshape(3)
    gamma = check_positive(gamma, "gamma")
    rel = points - viewpoint
    norms = np.linalg.norm(rel, axis=1)
    max_norm = float(norms.max())
    if max_norm <= 0.0:
        raise DataError("all points coincide with the viewpoint")
    radius = gamma * max_norm
    ok = norms > 1e-12 * max_norm
    factors = (2.0 * radius - norms[ok]) / norms[ok]
    flipped = rel[ok] * factors[:, None]
    cloud = np.vstack([flipped, np.zeros(3)])
    extreme = _extreme_points(cloud)
    visible = np.zeros(points.shape[0], dtype=bool)
    visible[np.flatnonzero(ok)] = extreme[:-1]
    return visible


# ---------------------------------------------------------------------------
# cameras and image feature grids


@dataclass
class CameraModel:
    """Pinhole camera as a 3x4 world-to-pixel projection plus image size."""

    projection: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.projection = np.asarray(self.projection, dtype=np.float64).reshape(3, 4)
        if not np.isfinite(self.projection).all():
            raise DataError("projection contains non-finite values")
        self.width = int(self.width)
        self.height = int(self.height)
        if self.width <= 0 or self.height <= 0:
            raise DataError("image size must be positive")
        if abs(np.linalg.det(self.projection[:, :3])) < 1e-12:
            raise DataError("projection matrix is singular")

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        m = self.projection[:, :3]
        return -np.linalg.solve(m, self.projection[:, 3])

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points, returning (pixels (n, 2), depth (n,))."""
        points = check_points(points)
        hom = points @ self.projection[:, :3].T + self.projection[:, 3]
        depth = hom[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            pixels = hom[:, :2] / depth[:, None]
        return pixels, depth


@dataclass
class FeatureMapGrid:
    """Dense image feature map at 1/fmap_scale of pixel resolution."""

    values: np.ndarray  # (rows, cols, dim)
    fmap_scale: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or self.values.shape[2] == 0:
            raise DataError(f"grid values must be (rows, cols, dim), got {self.values.shape}")
        self.fmap_scale = check_positive(self.fmap_scale, "fmap_scale")


def load_grid_file(path) -> FeatureMapGrid:
    values, scale = _io.read_grid_file(path)
    return FeatureMapGrid(values, scale)


def write_grid_file(path, grid: FeatureMapGrid) -> None:
    _io.write_grid_file(path, grid.values, grid.fmap_scale)


def load_camera_file(path) -> list[CameraModel]:
    return [CameraModel(proj, w, h) for proj, w, h in _io.read_camera_file(path)]


def write_camera_file(path, cameras: list[CameraModel]) -> None:
    _io.write_camera_file(path, [(c.projection, c.width, c.height) for c in cameras])


def build_view_index(points: np.ndarray, cameras: list[CameraModel], gamma: float) -> list[list[tuple[int, tuple[float, float]]]]:
    """For each point, the list of (view id, pixel) observations.

    A point is observed by a camera when it has positive depth, projects
    inside the image, and survives hidden point removal from the camera
    center among all such candidates.
    """
    points = check_points(points)
    index: list[list[tuple[int, tuple[float, float]]]] = [[] for _ in range(points.shape[0])]
    for view_id, cam in enumerate(cameras):
        pixels, depth = cam.project(points)
        cand = (depth > 0)
        cand &= (pixels[:, 0] >= 0) & (pixels[:, 0] < cam.width)
        cand &= (pixels[:, 1] >= 0) & (pixels[:, 1] < cam.height)
        cand_idx = np.flatnonzero(cand)
        if cand_idx.size == 0:
            continue
        visible = hidden_point_removal(points[cand_idx], cam.center, gamma)
        for i in cand_idx[visible]:
            index[i].append((view_id, (float(pixels[i, 0]), float(pixels[i, 1]))))
    return index


def project_image_features(view_index, grids: list[FeatureMapGrid]) -> FeatureChannel:
    """Average grid features over each point's observations.

    Pixel (ux, uy) reads grid cell (floor(uy / scale), floor(ux / scale)).
    Observations falling outside their grid are skipped; points with no
    usable observation get an absent (NaN) row.
    """
    if not grids:
        raise DataError("no feature grids given")
    dim = grids[0].values.shape[2]
    for g in grids:
        if g.values.shape[2] != dim:
            raise DataError("feature grids disagree on dimension")
    out = np.full((len(view_index), dim), np.nan)
    for p, obs in enumerate(view_index):
        acc = np.zeros(dim)
        count = 0
        for view_id, (ux, uy) in obs:
            if not 0 <= view_id < len(grids):
                raise DataError(f"view id {view_id} out of range")
            grid = grids[view_id]
            r = int(np.floor(uy / grid.fmap_scale))
            c = int(np.floor(ux / grid.fmap_scale))
            if 0 <= r < grid.values.shape[0] and 0 <= c < grid.values.shape[1]:
                acc += grid.values[r, c]
                count += 1
        if count:
            out[p] = acc / count
    return FeatureChannel("I", out, None)


# ---------------------------------------------------------------------------
# point embedding aggregation


def aggregate_point_features(ds_points: np.ndarray, per_scan_points, per_scan_vectors,
                             radius: float = POINT_FEATURE_RADIUS) -> FeatureChannel:
    """Average scan-point embeddings within `radius` of each query point.

    Scans are pooled in world coordinates. A query point with no scan
    point inside the closed ball takes the nearest scan point's vector.
    """
    ds_points = check_points(ds_points, name="ds_points")
    radius = check_positive(radius, "radius")
    if len(per_scan_points) != len(per_scan_vectors):
        raise DataError("per-scan points and vectors differ in length")
    if not per_scan_points:
        raise DataError("no scan features given")
    pts = []
    vecs = []
    for sp, sv in zip(per_scan_points, per_scan_vectors):
        sp = check_points(sp, name="scan points")
        sv = np.asarray(sv, dtype=np.float64)
        if sv.ndim != 2 or sv.shape[0] != sp.shape[0]:
            raise DataError("scan vectors do not align with scan points")
        pts.append(sp)
        vecs.append(sv)
    pool = np.vstack(pts)
    bank = np.vstack(vecs)
    if bank.shape[1] == 0 or pool.shape[0] == 0:
        raise DataError("empty feature pool")
    if not np.isfinite(bank).all():
        raise DataError("scan vectors contain non-finite values")
    tree = cKDTree(pool)
    out = np.empty((ds_points.shape[0], bank.shape[1]))
    neighbor_lists = tree.query_ball_point(ds_points, radius) if ds_points.shape[0] else []
    for i, neighbors in enumerate(neighbor_lists):
        if neighbors:
            out[i] = bank[neighbors].mean(axis=0)
        else:
            _, j = tree.query(ds_points[i], k=1)
            out[i] = bank[j]
    return FeatureChannel("P", out, None)
