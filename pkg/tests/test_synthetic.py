"""Synthetic scene generator: determinism, geometry, validation."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from ncutseg.errors import DataError
from ncutseg.merge import Aabb
from ncutseg.synthetic import SceneSpec, aabb_gap, generate_scene, write_scene


def test_generation_is_deterministic():
    spec = SceneSpec(seed=9, n_objects=5, extent=(25.0, 10.0))
    a = generate_scene(spec)
    b = generate_scene(spec)
    np.testing.assert_array_equal(a.map.cloud.points, b.map.cloud.points)
    np.testing.assert_array_equal(a.gt_labels, b.gt_labels)
    for ea, eb in zip(a.scan_embeddings, b.scan_embeddings):
        np.testing.assert_array_equal(ea, eb)
    for ga, gb in zip(a.grids, b.grids):
        np.testing.assert_array_equal(ga.values, gb.values)


def test_different_seeds_differ():
    a = generate_scene(SceneSpec(seed=1, n_objects=4, extent=(25.0, 10.0)))
    b = generate_scene(SceneSpec(seed=2, n_objects=4, extent=(25.0, 10.0)))
    assert a.map.cloud.points.shape != b.map.cloud.points.shape or \
        not np.array_equal(a.map.cloud.points, b.map.cloud.points)


def test_aabb_gap():
    a = Aabb([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    b = Aabb([3.0, 0.0, 0.0], [4.0, 1.0, 1.0])
    assert aabb_gap(a, b) == pytest.approx(2.0)
    c = Aabb([0.5, 0.5, 0.0], [1.5, 1.5, 1.0])
    assert aabb_gap(a, c) == 0.0


def test_min_gap_is_respected():
    scene = generate_scene(SceneSpec(seed=3, n_objects=10, min_gap=3.0))
    boxes = scene.object_boxes
    assert len(boxes) == 10
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            assert aabb_gap(boxes[i], boxes[j]) >= 3.0 - 1e-9


def test_labels_partition_dense():
    scene = generate_scene(SceneSpec(seed=4, n_objects=6, extent=(30.0, 10.0)))
    labels = scene.gt_labels
    assert labels.shape[0] == scene.map.cloud.n
    assert set(np.unique(labels).tolist()) == set(range(7))  # 0 = ground
    assert (labels >= 0).all()


def test_no_objects_gives_all_ground():
    scene = generate_scene(SceneSpec(seed=5, n_objects=0, extent=(15.0, 8.0)))
    assert (scene.gt_labels == 0).all()
    assert scene.map.cloud.n > 0


def test_objects_sit_above_sampled_ground():
    scene = generate_scene(SceneSpec(seed=6, n_objects=5, extent=(25.0, 10.0)))
    obj = scene.gt_labels > 0
    assert scene.map.cloud.points[obj, 2].min() >= 0.35 - 1e-9


def test_pair_mode_geometry():
    spec = SceneSpec(seed=7, n_objects=8, extent=(30.0, 10.0), pair_gap=0.3,
                     size_range=(1.0, 1.4), gap_grid=0.35,
                     avoid_x=((-1.0, 3.0), (21.0, 25.0)), proto_norm=1.25)
    scene = generate_scene(spec)
    boxes = scene.object_boxes
    assert len(boxes) == 8
    gaps = []
    for i in range(0, 8, 2):
        gaps.append(aabb_gap(boxes[i], boxes[i + 1]))
    for g in gaps:
        assert g == pytest.approx(0.3, abs=1e-9)
    # pairs centered on multiples of the gap grid stay distinct across pairs
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if j != i + 1 or i % 2 == 1:
                assert aabb_gap(boxes[i], boxes[j]) >= spec.min_gap - 1e-9
    # boxes keep out of the excluded x bands
    for box in boxes:
        for lo, hi in spec.avoid_x:
            assert box.hi[0] <= lo or box.lo[0] >= hi


def test_pair_mode_prototypes_antipodal():
    spec = SceneSpec(seed=8, n_objects=4, extent=(30.0, 10.0), pair_gap=0.3,
                     proto_norm=1.25)
    scene = generate_scene(spec)
    protos = scene.prototypes
    # rows 1.. are object prototypes; pair partners point opposite ways
    for i in range(1, 5):
        assert np.linalg.norm(protos[i]) == pytest.approx(1.25, abs=1e-9)
    for i in (1, 3):
        cos = protos[i] @ protos[i + 1] / (np.linalg.norm(protos[i]) * np.linalg.norm(protos[i + 1]))
        assert cos < -0.9  # antipodal up to a small perturbation


def test_pair_mode_needs_even_count():
    with pytest.raises(DataError, match="even"):
        generate_scene(SceneSpec(seed=0, n_objects=3, pair_gap=0.3))


def test_spec_validation():
    with pytest.raises(DataError, match="size_range"):
        SceneSpec(size_range=(2.0, 1.0)).validate()
    with pytest.raises(DataError, match="0.35"):
        SceneSpec(base_height=(0.1, 0.2)).validate()
    with pytest.raises(DataError, match="avoid_x"):
        SceneSpec(avoid_x=(3.0,)).validate()
    with pytest.raises(DataError, match="proto_norm"):
        SceneSpec(proto_norm=0.0).validate()
    with pytest.raises(DataError, match="gap_grid"):
        SceneSpec(gap_grid=-1.0).validate()
    with pytest.raises(DataError, match="n_objects"):
        SceneSpec(n_objects=-1).validate()


def test_write_scene_layout(tmp_path):
    scene = generate_scene(SceneSpec(seed=10, n_objects=3, extent=(20.0, 8.0)))
    paths = write_scene(scene, tmp_path / "scene")
    for key in ("scans_dir", "poses_path", "features_dir", "cameras_path",
                "grids_dir", "gt_labels_path"):
        assert key in paths
    assert Path(paths["poses_path"]).exists()
    assert Path(paths["gt_labels_path"]).exists()
    assert sorted(Path(paths["scans_dir"]).glob("*.bin"))
    meta = json.loads((tmp_path / "scene" / "meta.json").read_text())
    assert meta["n_map_points"] == scene.map.cloud.n
    assert meta["n_instances"] == 3
    assert meta["spec"]["seed"] == 10


def test_scan_count_matches_trajectory(small_scene):
    scene, _, paths = small_scene
    assert len(scene.scans) == len(scene.poses)
    assert len(sorted(Path(paths["scans_dir"]).glob("*.bin"))) == len(scene.scans)
    # every scan has an embedding row per point
    for scan, emb in zip(scene.scans, scene.scan_embeddings):
        assert emb.shape == (scan.n, scene.spec.embed_dim)
