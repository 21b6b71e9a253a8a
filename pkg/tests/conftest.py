"""Shared fixtures: one small synthetic scene on disk per test session."""

from __future__ import annotations

import pytest

from ncutseg.synthetic import SceneSpec, generate_scene, write_scene


@pytest.fixture(scope="session")
def small_scene(tmp_path_factory):
    """A compact scene with well separated objects, written to disk once.

    Returns (scene, outdir, paths) where paths holds the pipeline input
    locations produced by write_scene.
    """
    spec = SceneSpec(seed=5, n_objects=4, extent=(30.0, 10.0))
    scene = generate_scene(spec)
    outdir = tmp_path_factory.mktemp("scene_small")
    paths = write_scene(scene, outdir)
    return scene, outdir, paths
