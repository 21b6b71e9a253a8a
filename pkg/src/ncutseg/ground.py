"""Ground removal via per-cell robust plane fits.

Points are binned into a horizontal grid anchored at the chunk's own
minimum x/y (so the mask is invariant to horizontal translation). Within
each cell a plane is fit by RANSAC to the lowest-quartile-height points;
a point is ground when it lies within the inlier tolerance of its cell
plane, or below the mean inlier height plus a fixed margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import check_points, check_positive, check_seed

GROUND_CELL = 2.0
RANSAC_ITERS = 100
INLIER_TOL = 0.1
HEIGHT_MARGIN = 0.2

# reject candidate planes steeper than ~72 degrees; ground is near-horizontal
_MIN_NORMAL_Z = 0.3


@dataclass
class GroundMask:
    is_ground: np.ndarray  # bool per input point
    mean_ground_height: float


def _lowest_quartile(points: np.ndarray) -> np.ndarray:
    """Indices of the lowest-height candidate points (at least 3)."""
    n = points.shape[0]
    take = max(3, int(np.ceil(n / 4)))
    take = min(take, n)
    order = np.argsort(points[:, 2], kind="stable")
    return order[:take]


def _fit_plane_ransac(points: np.ndarray, iters: int, tol: float, rng: np.random.Generator) -> np.ndarray | None:
    """Fit a near-horizontal plane, returning (a, b, c) with z = a x + b y + c."""
    n = points.shape[0]
    if n < 3:
        return None
    picks = rng.integers(0, n, size=(iters, 3))
    valid = (
        (picks[:, 0] != picks[:, 1])
        & (picks[:, 0] != picks[:, 2])
        & (picks[:, 1] != picks[:, 2])
    )
    p0, p1, p2 = points[picks[:, 0]], points[picks[:, 1]], points[picks[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    valid &= norms > 1e-12
    safe = np.where(norms > 1e-12, norms, 1.0)
    normals = normals / safe[:, None]
    valid &= np.abs(normals[:, 2]) >= _MIN_NORMAL_Z
    vsel = np.flatnonzero(valid)
    if vsel.size == 0:
        return None
    diff = points[None, :, :] - p0[vsel, None, :]
    dist = np.abs(np.einsum("kij,kj->ki", diff, normals[vsel]))
    counts = (dist <= tol).sum(axis=1)
    best = int(np.argmax(counts))  # ties keep the earliest sample
    inliers = dist[best] <= tol
    if inliers.sum() < 3:
        return None
    # least-squares refinement on the consensus set
    sel = points[inliers]
    design = np.column_stack([sel[:, 0], sel[:, 1], np.ones(len(sel))])
    coef, *_ = np.linalg.lstsq(design, sel[:, 2], rcond=None)
    return coef


def _plane_distance(points: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Orthogonal distance of points to the plane z = a x + b y + c."""
    a, b, c = coef
    return np.abs(points[:, 0] * a + points[:, 1] * b + c - points[:, 2]) / np.sqrt(a * a + b * b + 1.0)


def estimate_ground(points: np.ndarray, cell: float = GROUND_CELL, ransac_iters: int = RANSAC_ITERS,
                    inlier_tol: float = INLIER_TOL, height_margin: float = HEIGHT_MARGIN,
                    seed: int = 0) -> GroundMask:
    """Classify each point of a chunk as ground or not.

    Fewer than 3 input points yields an all-false mask (nothing to fit).
    Cells with fewer than 3 points fall back to a plane fit over the whole
    chunk's candidate set.
    """
    points = check_points(points)
    cell = check_positive(cell, "cell")
    inlier_tol = check_positive(inlier_tol, "inlier_tol")
    seed = check_seed(seed)
    n = points.shape[0]
    if n < 3:
        return GroundMask(np.zeros(n, dtype=bool), float("nan"))

    rng = np.random.default_rng(seed)
    global_coef = _fit_plane_ransac(points[_lowest_quartile(points)], ransac_iters, inlier_tol, rng)

    # grid anchored at the chunk's own min corner: translation invariant
    anchor = points[:, :2].min(axis=0)
    keys = np.floor((points[:, :2] - anchor) / cell).astype(np.int64)
    flat = keys[:, 0] * 1_000_003 + keys[:, 1]
    order = np.argsort(flat, kind="stable")
    boundaries = np.flatnonzero(np.diff(flat[order])) + 1
    groups = np.split(order, boundaries)

    plane_dist = np.full(n, np.inf)
    for members in groups:
        cell_pts = points[members]
        coef = None
        if len(members) >= 3:
            coef = _fit_plane_ransac(cell_pts[_lowest_quartile(cell_pts)], ransac_iters, inlier_tol, rng)
        if coef is None:
            coef = global_coef
        if coef is None:
            continue
        plane_dist[members] = _plane_distance(cell_pts, coef)

    near_plane = plane_dist <= inlier_tol
    mean_h = float(points[near_plane, 2].mean()) if near_plane.any() else float("nan")
    is_ground = near_plane.copy()
    if np.isfinite(mean_h):
        is_ground |= points[:, 2] <= mean_h + height_margin
    return GroundMask(is_ground, mean_h)


class GroundFilter(BaseEstimator):
    """Estimator wrapper around estimate_ground.

    fit_predict returns a boolean mask (True = ground). After fit the mask
    and the mean inlier ground height are available as attributes.
    """

    def __init__(self, cell: float = GROUND_CELL, ransac_iters: int = RANSAC_ITERS,
                 inlier_tol: float = INLIER_TOL, height_margin: float = HEIGHT_MARGIN, seed: int = 0):
        self.cell = cell
        self.ransac_iters = ransac_iters
        self.inlier_tol = inlier_tol
        self.height_margin = height_margin
        self.seed = seed

    def fit(self, X, y=None):
        mask = estimate_ground(X, self.cell, self.ransac_iters, self.inlier_tol,
                               self.height_margin, self.seed)
        self.is_ground_ = mask.is_ground
        self.mean_ground_height_ = mask.mean_ground_height
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).is_ground_
