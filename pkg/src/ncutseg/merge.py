"""Greedy cross-chunk instance merging on bounding box overlap.

Chunks are processed in trajectory order. Each local instance merges into
the existing global instance whose axis-aligned box overlaps it best
(single target, no transitive closure) or starts a new one. Points claimed
by different global instances keep the claim from the chunk whose center
is nearer; ties go to the earlier chunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .scene import Chunk
from .validation import check_labels

MERGE_IOU = 0.01


@dataclass
class Aabb:
    """Axis-aligned box as inclusive min and max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if (self.hi < self.lo).any():
            raise DataError("box max must not be below box min")

    @classmethod
    def of_points(cls, points: np.ndarray) -> "Aabb":
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.shape[0] == 0:
            raise DataError("cannot bound an empty point set")
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))


def box_iou(a: Aabb, b: Aabb) -> float:
    """Intersection over union of two boxes.

    Degenerate (zero volume) boxes compare as 1 when identical, else 0.
    """
    if a.volume == 0.0 or b.volume == 0.0:
        if np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi):
            return 1.0
        return 0.0
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    if (hi <= lo).any():
        return 0.0
    inter = float(np.prod(hi - lo))
    union = a.volume + b.volume - inter
    return inter / union


@dataclass
class MapSegmentation:
    """Global instance labels per map point with per-id provenance."""

    labels: np.ndarray
    # global id -> list of (chunk index, local instance id)
    provenance: dict[int, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def n_instances(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0


def merge_chunks(chunk_labelings: list[tuple[Chunk, np.ndarray]], n_map_points: int,
                 iou_threshold: float = MERGE_IOU) -> MapSegmentation:
    """Fuse per-chunk instance labelings into one map labeling.

    `chunk_labelings` pairs each chunk with labels over its raw points
    (0 = unassigned/ground). A single chunk passes through with its ids
    renumbered densely.
    """
    if iou_threshold < 0:
        raise DataError("iou_threshold must be non-negative")
    claims_gid = np.full(n_map_points, -1, dtype=np.int64)
    claims_dist = np.full(n_map_points, np.inf)
    claims_chunk = np.full(n_map_points, -1, dtype=np.int64)
    boxes: list[Aabb] = []
    provenance: dict[int, list[tuple[int, int]]] = {}

    for chunk_idx, (chunk, labels) in enumerate(chunk_labelings):
        labels = check_labels(labels, n=chunk.n_raw, name=f"chunk {chunk_idx} labels")
        center = chunk.center
        for local_id in np.unique(labels):
            if local_id == 0:
                continue
            member_rows = np.flatnonzero(labels == local_id)
            map_idx = chunk.raw_indices[member_rows]
            box = Aabb.of_points(chunk.raw_points[member_rows])
            gid = -1
            best_iou = iou_threshold
            for g, gbox in enumerate(boxes):
                iou = box_iou(box, gbox)
                if iou > best_iou:
                    best_iou = iou
                    gid = g
            if gid < 0:
                gid = len(boxes)
                boxes.append(box)
                provenance[gid] = []
            else:
                boxes[gid] = boxes[gid].union(box)
            provenance[gid].append((chunk_idx, int(local_id)))
            # claim points: the strictly nearer chunk center wins a conflict,
            # so equal distances keep the earlier chunk's claim
            dists = np.linalg.norm(chunk.raw_points[member_rows] - center, axis=1)
            take = dists < claims_dist[map_idx]
            taken = map_idx[take]
            claims_gid[taken] = gid
            claims_dist[taken] = dists[take]
            claims_chunk[taken] = chunk_idx
    # renumber densely in order of global id creation
    used = np.unique(claims_gid[claims_gid >= 0])
    remap = {int(g): i + 1 for i, g in enumerate(used)}
    labels_out = np.zeros(n_map_points, dtype=np.int64)
    for g, new in remap.items():
        labels_out[claims_gid == g] = new
    prov_out = {remap[int(g)]: members for g, members in provenance.items() if int(g) in remap}
    return MapSegmentation(labels_out, prov_out)


def instance_boxes(segmentation: MapSegmentation, points: np.ndarray) -> dict[int, Aabb]:
    """Bounding box of every instance in a map segmentation."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    out = {}
    for gid in np.unique(segmentation.labels):
        if gid == 0:
            continue
        out[int(gid)] = Aabb.of_points(points[segmentation.labels == gid])
    return out
