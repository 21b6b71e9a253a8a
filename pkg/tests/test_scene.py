"""Scene model: poses, voxel downsampling, aggregation, chunking, transfer."""

from __future__ import annotations

import numpy as np
import pytest

from ncutseg.errors import DataError
from ncutseg.scene import (AggregatedMap, PointCloud, RigidPose, aggregate,
                           extract_chunks, transfer_labels, voxel_downsample)


# ---------------------------------------------------------------------------
# poses

def test_pose_rotation_90_degrees_about_z():
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    pose = RigidPose(rot, np.zeros(3))
    out = pose.apply(np.array([[1.0, 0.0, 0.0]]))
    np.testing.assert_allclose(out, [[0.0, 1.0, 0.0]], atol=1e-9)


def test_pose_inverse_round_trips():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(m)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    pose = RigidPose(q, rng.uniform(-5, 5, 3))
    pts = rng.uniform(-10, 10, (20, 3))
    np.testing.assert_allclose(pose.inverse().apply(pose.apply(pts)), pts, atol=1e-12)


def test_pose_rejects_non_orthonormal():
    with pytest.raises(DataError, match="orthonormal"):
        RigidPose(np.eye(3) * 2.0, np.zeros(3))


def test_pose_rejects_reflection():
    rot = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(DataError, match="determinant"):
        RigidPose(rot, np.zeros(3))


# ---------------------------------------------------------------------------
# voxel downsampling

def test_voxel_single_point_identity():
    ds, raw_to_ds = voxel_downsample(np.array([[1.0, 2.0, 3.0]]), 0.35)
    np.testing.assert_array_equal(ds, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(raw_to_ds, [0])


def test_voxel_centroid_of_shared_cell():
    pts = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]])
    ds, raw_to_ds = voxel_downsample(pts, 0.35)
    np.testing.assert_allclose(ds, [[0.05, 0.0, 0.0]], atol=1e-15)
    np.testing.assert_array_equal(raw_to_ds, [0, 0])


def test_voxel_separated_cells_keep_both():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    ds, raw_to_ds = voxel_downsample(pts, 0.35)
    assert ds.shape == (2, 3)
    np.testing.assert_array_equal(ds[raw_to_ds], pts)


def test_voxel_never_increases_count_and_stays_near_cell_center():
    rng = np.random.default_rng(1)
    for voxel in (0.1, 0.35, 1.0):
        pts = rng.uniform(-5, 5, (400, 3))
        ds, raw_to_ds = voxel_downsample(pts, voxel)
        assert ds.shape[0] <= pts.shape[0]
        assert raw_to_ds.max() == ds.shape[0] - 1
        # representative lies in its own cell: within half a diagonal of
        # the cell center, and within one diagonal of every member point
        cell_centers = (np.floor(ds / voxel) + 0.5) * voxel
        assert np.linalg.norm(ds - cell_centers, axis=1).max() <= np.sqrt(3) / 2 * voxel + 1e-12
        assert np.linalg.norm(pts - ds[raw_to_ds], axis=1).max() <= np.sqrt(3) * voxel + 1e-12


def test_voxel_order_independent():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-3, 3, (200, 3))
    ds_a, _ = voxel_downsample(pts, 0.35)
    perm = rng.permutation(len(pts))
    ds_b, _ = voxel_downsample(pts[perm], 0.35)
    np.testing.assert_allclose(ds_a, ds_b, atol=1e-12)


# ---------------------------------------------------------------------------
# aggregation

def test_aggregate_identity_pose_far_points_is_input():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]])
    amap = aggregate([PointCloud(pts)], [RigidPose.identity()])
    assert amap.cloud.n == 3
    np.testing.assert_allclose(np.sort(amap.cloud.points, axis=0), np.sort(pts, axis=0))


def test_aggregate_duplicate_scan_dedupes():
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]])
    cloud = PointCloud(pts)
    amap = aggregate([cloud, cloud], [RigidPose.identity(), RigidPose.identity()])
    assert amap.cloud.n == 3


def test_aggregate_applies_poses():
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    amap = aggregate([PointCloud(np.array([[1.0, 0, 0]]))], [RigidPose(rot, np.zeros(3))])
    np.testing.assert_allclose(amap.cloud.points, [[0.0, 1.0, 0.0]], atol=1e-9)


def test_aggregate_mismatch_and_empty_rejected():
    with pytest.raises(DataError, match="poses"):
        aggregate([PointCloud(np.zeros((1, 3)))], [])
    with pytest.raises(DataError, match="no scans"):
        aggregate([], [])


def test_aggregate_equivariant_under_global_rigid_motion():
    rng = np.random.default_rng(3)
    scans = [PointCloud(rng.uniform(0, 4, (60, 3))) for _ in range(3)]
    poses = [RigidPose(np.eye(3), np.array([2.0 * i, 0.0, 0.0])) for i in range(3)]
    theta = 0.7
    g_rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                      [np.sin(theta), np.cos(theta), 0],
                      [0, 0, 1.0]])
    g = RigidPose(g_rot, np.array([3.0, -2.0, 1.0]))
    moved = [RigidPose(g.rotation @ p.rotation, g.apply(p.translation[None])[0]) for p in poses]

    map_a = aggregate(scans, poses)
    map_b = aggregate(scans, moved)
    # voxel cells shift under the motion, so compare as point sets within
    # one voxel diameter in both directions
    from scipy.spatial import cKDTree
    transformed = g.apply(map_a.cloud.points)
    tol = np.sqrt(3) * 0.05 + 1e-9
    d_ab, _ = cKDTree(map_b.cloud.points).query(transformed)
    d_ba, _ = cKDTree(transformed).query(map_b.cloud.points)
    assert d_ab.max() <= tol
    assert d_ba.max() <= tol


# ---------------------------------------------------------------------------
# chunk extraction

def _straight_map(length: float, step: float = 2.0) -> AggregatedMap:
    xs = np.arange(0.0, length + 1e-9, step)
    poses = [RigidPose(np.eye(3), np.array([x, 0.0, 0.0])) for x in xs]
    pts = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
    return AggregatedMap(PointCloud(pts), poses)


def test_chunk_centers_along_100m_trajectory():
    amap = _straight_map(100.0)
    chunks = extract_chunks(amap, edge=25.0, stride=22.0)
    centers = sorted(c.center[0] for c in chunks)
    np.testing.assert_allclose(centers, [0.0, 22.0, 44.0, 66.0, 88.0], atol=1e-9)


def test_chunk_short_trajectory_single_chunk():
    amap = _straight_map(10.0)
    chunks = extract_chunks(amap, edge=25.0, stride=22.0)
    assert len(chunks) == 1
    assert chunks[0].n_raw == amap.cloud.n


def test_chunk_face_point_included():
    poses = [RigidPose.identity()]
    pts = np.array([[12.5, 0.0, 0.0], [12.6, 0.0, 0.0]])
    amap = AggregatedMap(PointCloud(pts), poses)
    chunks = extract_chunks(amap, edge=25.0, stride=22.0)
    assert len(chunks) == 1
    np.testing.assert_array_equal(chunks[0].raw_indices, [0])


def test_chunk_union_covers_points_near_centers():
    rng = np.random.default_rng(4)
    xs = np.arange(0.0, 60.0 + 1e-9, 2.0)
    poses = [RigidPose(np.eye(3), np.array([x, 0.0, 0.0])) for x in xs]
    pts = rng.uniform([-5, -10, -2], [65, 10, 3], (500, 3))
    amap = AggregatedMap(PointCloud(pts), poses)
    edge = 25.0
    chunks = extract_chunks(amap, edge=edge, stride=22.0)
    covered = np.zeros(len(pts), dtype=bool)
    for chunk in chunks:
        covered[chunk.raw_indices] = True
    centers = np.array([c.center for c in chunks])
    near = np.zeros(len(pts), dtype=bool)
    for center in centers:
        near |= np.all(np.abs(pts - center) <= edge / 2, axis=1)
    assert (covered == near).all()


def test_chunk_carries_consistent_downsample():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 10, (300, 3))
    amap = AggregatedMap(PointCloud(pts), [RigidPose(np.eye(3), np.array([5.0, 0, 0]))])
    chunks = extract_chunks(amap, edge=25.0, stride=22.0, ncut_voxel=0.35)
    chunk = chunks[0]
    assert chunk.n_ds <= chunk.n_raw
    assert chunk.raw_to_ds.shape == (chunk.n_raw,)
    assert chunk.raw_to_ds.max() == chunk.n_ds - 1


# ---------------------------------------------------------------------------
# label transfer

def test_transfer_identity():
    rng = np.random.default_rng(6)
    pts = rng.uniform(0, 5, (40, 3))
    labels = rng.integers(0, 4, 40)
    np.testing.assert_array_equal(transfer_labels(pts, labels, pts), labels)


def test_transfer_single_source():
    dst = np.random.default_rng(7).uniform(0, 5, (10, 3))
    out = transfer_labels(np.array([[0.0, 0, 0]]), np.array([9]), dst)
    np.testing.assert_array_equal(out, np.full(10, 9))


def test_transfer_equidistant_tie_takes_lowest_index():
    # sources 3 and 7 sit symmetric around the destination
    src = np.full((8, 3), 100.0)
    src[3] = [1.0, 0.0, 0.0]
    src[7] = [-1.0, 0.0, 0.0]
    labels = np.arange(8) * 10
    out = transfer_labels(src, labels, np.array([[0.0, 0.0, 0.0]]))
    assert out[0] == 30


def test_transfer_empty_destination():
    out = transfer_labels(np.ones((2, 3)), np.array([1, 2]), np.zeros((0, 3)))
    assert out.shape == (0,)
