"""End-to-end segmentation runs: scans on disk to labeled map on disk.

Stages: aggregate scans, cut chunks along the trajectory, remove ground
per chunk, build per-chunk similarity graphs over the non-ground
downsample, run recursive normalized cuts (or the density baseline),
merge chunk instances globally, then evaluate against ground truth when
available. Chunks are independent, so they can run on a thread pool; the
gather order is fixed by chunk index, which keeps results byte-identical
for any worker count.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as _io
from .baseline import euclidean_cluster
from .config import PipelineConfig
from .errors import ConfigError, DataError
from .features import (FeatureChannel, aggregate_point_features, build_view_index,
                       load_camera_file, load_grid_file, load_feature_file,
                       project_image_features)
from .ground import estimate_ground
from .merge import MapSegmentation, merge_chunks
from .metrics import EvalReport, evaluate, proposal_confidence
from .ncut import NormalizedCutsClustering
from .scene import AggregatedMap, Chunk, RigidPose, aggregate, extract_chunks, load_scan, voxel_downsample

_VERSION = "0.1.0"


@dataclass
class ChunkResult:
    labels_raw: np.ndarray  # over chunk raw points, 0 = ground/noise
    confidences: dict[int, float]  # local instance id -> confidence
    n_ds: int
    n_ground: int


@dataclass
class RunResult:
    config: PipelineConfig
    map: AggregatedMap
    chunks: list[Chunk]
    segmentation: MapSegmentation
    confidences: dict[int, float]  # global instance id -> confidence
    report: EvalReport | None
    outputs: dict[str, str]
    wall_time: float


@dataclass
class _Inputs:
    scans: list
    poses: list[RigidPose]
    scan_world_points: list[np.ndarray] | None
    scan_vectors: list[np.ndarray] | None
    cameras: list | None
    grids: list | None
    gt_labels: np.ndarray | None


def _load_inputs(config: PipelineConfig) -> _Inputs:
    # missing referenced files violate the run precondition and are
    # configuration errors; malformed contents stay data errors
    scans_dir = Path(config.scans_dir)
    if not scans_dir.is_dir():
        raise ConfigError(f"scans directory not found: {scans_dir}")
    scan_paths = sorted(scans_dir.glob("*.bin"))
    if not scan_paths:
        raise ConfigError(f"no scan files in {scans_dir}")
    if not Path(config.poses_path).is_file():
        raise ConfigError(f"pose file not found: {config.poses_path}")
    scans = [load_scan(p) for p in scan_paths]
    pose_mats = _io.read_pose_file(config.poses_path)
    if len(pose_mats) != len(scans):
        raise DataError(f"{len(scans)} scans but {len(pose_mats)} poses")
    poses = [RigidPose(r, t) for r, t in pose_mats]

    scan_world_points = None
    scan_vectors = None
    if "P" in config.channels:
        feat_dir = Path(config.features_dir)
        if not feat_dir.is_dir():
            raise ConfigError(f"features directory not found: {feat_dir}")
        scan_world_points = []
        scan_vectors = []
        for path, scan, pose in zip(scan_paths, scans, poses):
            feat_path = feat_dir / (path.stem + ".aifb")
            if not feat_path.is_file():
                raise ConfigError(f"feature bank not found: {feat_path}")
            count, channel = load_feature_file(feat_path)
            if count != scan.n:
                raise DataError(f"feature bank {feat_path} has {count} rows for {scan.n} points")
            if channel.kind != "P":
                raise DataError(f"feature bank {feat_path} has kind {channel.kind}, expected P")
            present = channel.present
            scan_world_points.append(pose.apply(scan.points)[present])
            scan_vectors.append(channel.vectors[present])

    cameras = None
    grids = None
    if "I" in config.channels:
        if not Path(config.cameras_path).is_file():
            raise ConfigError(f"camera file not found: {config.cameras_path}")
        cameras = load_camera_file(config.cameras_path)
        grids_dir = Path(config.grids_dir)
        if not grids_dir.is_dir():
            raise ConfigError(f"grids directory not found: {grids_dir}")
        grid_paths = sorted(grids_dir.glob("*.grid"))
        if len(grid_paths) != len(cameras):
            raise DataError(f"{len(cameras)} cameras but {len(grid_paths)} grids")
        grids = [load_grid_file(p) for p in grid_paths]

    gt_labels = None
    if config.gt_labels_path:
        if not Path(config.gt_labels_path).is_file():
            raise ConfigError(f"label file not found: {config.gt_labels_path}")
        gt_labels = _io.read_label_file(config.gt_labels_path)
    return _Inputs(scans, poses, scan_world_points, scan_vectors, cameras, grids, gt_labels)


def _chunk_channels(config: PipelineConfig, ds_points: np.ndarray, inputs: _Inputs) -> list[FeatureChannel]:
    channels = []
    if "P" in config.channels:
        chan = aggregate_point_features(ds_points, inputs.scan_world_points,
                                        inputs.scan_vectors, config.feature_radius)
        channels.append(chan.with_theta(config.theta_p))
    if "I" in config.channels:
        view_index = build_view_index(ds_points, inputs.cameras, config.hpr_gamma)
        chan = project_image_features(view_index, inputs.grids)
        channels.append(chan.with_theta(config.theta_i))
    return channels


def _process_chunk(chunk_idx: int, chunk: Chunk, config: PipelineConfig, inputs: _Inputs) -> ChunkResult:
    ground = estimate_ground(chunk.raw_points, config.ground_cell, config.ground_iters,
                             config.ground_tol, config.ground_margin,
                             seed=config.seed + 7919 * chunk_idx)
    non_ground = np.flatnonzero(~ground.is_ground)
    labels_raw = np.zeros(chunk.n_raw, dtype=np.int64)
    if non_ground.size == 0:
        return ChunkResult(labels_raw, {}, 0, chunk.n_raw)
    ds_points, raw_to_ds = voxel_downsample(chunk.raw_points[non_ground], config.ncut_voxel)
    channels = _chunk_channels(config, ds_points, inputs)
    if config.method == "dbscan":
        ds_labels = euclidean_cluster(ds_points, config.dbscan_eps, config.dbscan_min_pts)
        confidences = {int(i): 0.5 for i in np.unique(ds_labels) if i > 0}
    else:
        clusterer = NormalizedCutsClustering(
            radius=config.radius, theta_s=config.theta_s,
            eig_threshold=config.resolved_eig_threshold(), min_share=config.min_share,
            min_points=config.min_points, w_floor=config.w_floor,
            sweep_points=config.sweep_points, tol=config.eig_tol,
            max_iter=config.eig_max_iter, seed=config.seed)
        ds_labels = clusterer.fit_predict(ds_points, channels=channels)
        confidences = proposal_confidence(clusterer.graph_, ds_labels)
    labels_raw[non_ground] = ds_labels[raw_to_ds]
    return ChunkResult(labels_raw, confidences, ds_points.shape[0], int(ground.is_ground.sum()))


def _merge_confidences(segmentation: MapSegmentation, results: list[ChunkResult]) -> dict[int, float]:
    """Point-count weighted mean of chunk instance confidences per global id."""
    out = {}
    for gid, members in segmentation.provenance.items():
        weight = 0.0
        acc = 0.0
        for chunk_idx, local_id in members:
            size = int((results[chunk_idx].labels_raw == local_id).sum())
            conf = results[chunk_idx].confidences.get(local_id, 0.5)
            acc += size * conf
            weight += size
        out[int(gid)] = acc / weight if weight > 0 else 0.5
    return out


class _Stage:
    """Context manager prefixing pipeline errors with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (ConfigError, DataError, RuntimeError)) and exc.args:
            exc.args = (f"[{self.name}] {exc.args[0]}",) + exc.args[1:]
        return False


def run(config: PipelineConfig, write_outputs: bool = True) -> RunResult:
    """Execute the full pipeline described by the config."""
    started = time.perf_counter()
    config.validate()
    with _Stage("load"):
        inputs = _load_inputs(config)
    with _Stage("aggregate"):
        amap = aggregate(inputs.scans, inputs.poses, config.map_voxel)
        if inputs.gt_labels is not None and inputs.gt_labels.shape[0] != amap.cloud.n:
            raise DataError(
                f"ground truth has {inputs.gt_labels.shape[0]} labels for {amap.cloud.n} map points")
    with _Stage("chunk"):
        chunks = extract_chunks(amap, config.chunk_edge, config.chunk_stride, config.ncut_voxel)
        if not chunks:
            raise DataError("no non-empty chunks; check trajectory and points")

    with _Stage("segment"):
        if config.workers and config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(
                    lambda i: _process_chunk(i, chunks[i], config, inputs), range(len(chunks))))
        else:
            results = [_process_chunk(i, c, config, inputs) for i, c in enumerate(chunks)]

    with _Stage("merge"):
        segmentation = merge_chunks(
            [(c, r.labels_raw) for c, r in zip(chunks, results)], amap.cloud.n, config.merge_iou)
        if segmentation.labels.max(initial=0) > 0xFFFF:
            raise DataError("more than 65535 instances cannot be encoded")
        confidences = _merge_confidences(segmentation, results)

    report = None
    if inputs.gt_labels is not None:
        with _Stage("evaluate"):
            report = evaluate(segmentation.labels, inputs.gt_labels, confidences)

    outputs: dict[str, str] = {}
    if write_outputs:
        with _Stage("write"):
            outputs = _write_outputs(config, amap, chunks, results, segmentation,
                                     confidences, report)

    wall = time.perf_counter() - started
    return RunResult(config, amap, chunks, segmentation, confidences, report, outputs, wall)


def _write_outputs(config, amap, chunks, results, segmentation, confidences, report) -> dict[str, str]:
    """Write run artifacts, removing partial files if any write fails."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        labels_path = outdir / "labels.bin"
        written.append(labels_path)
        _io.write_label_file(labels_path, segmentation.labels)
        map_path = outdir / "map.bin"
        written.append(map_path)
        _io.write_scan_file(map_path, amap.cloud.points, amap.cloud.intensity)
        conf_path = outdir / "confidences.json"
        written.append(conf_path)
        conf_path.write_text(json.dumps({str(k): v for k, v in sorted(confidences.items())},
                                        indent=2) + "\n")
        manifest = {
            "version": _VERSION,
            "library_versions": _library_versions(),
            "config": config.as_dict(),
            "n_map_points": int(amap.cloud.n),
            "n_chunks": len(chunks),
            "n_instances": segmentation.n_instances,
            "n_ground_points": int(sum(r.n_ground for r in results)),
        }
        manifest_path = outdir / "manifest.json"
        written.append(manifest_path)
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        outputs = {"labels": str(labels_path), "map": str(map_path),
                   "confidences": str(conf_path), "manifest": str(manifest_path)}
        if report is not None:
            report_path = outdir / "report.json"
            written.append(report_path)
            report_path.write_text(json.dumps(report.as_dict(), indent=2) + "\n")
            outputs["report"] = str(report_path)
        return outputs
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _library_versions() -> dict[str, str]:
    import platform

    import scipy

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


ABLATE_PARAMS = ("theta_s", "theta_p", "theta_i", "chunk_edge", "ncut_voxel",
                 "eig_threshold", "radius")


def ablate(config: PipelineConfig, param: str, values: list) -> list[dict]:
    """Re-run the pipeline sweeping one numeric config field.

    Requires ground truth labels so each run yields a metric row.
    """
    if not config.gt_labels_path:
        raise ConfigError("ablation needs gt_labels_path for metrics")
    if param not in ABLATE_PARAMS:
        raise ConfigError(f"unknown ablation parameter {param!r}; valid: {', '.join(ABLATE_PARAMS)}")
    base = config.as_dict()
    rows = []
    for value in values:
        data = dict(base)
        data[param] = value
        variant = PipelineConfig(**data)
        result = run(variant, write_outputs=False)
        row = {"param": param, "value": value, "wall_time": result.wall_time}
        row.update(result.report.as_dict())
        rows.append(row)
    return rows


def ablation_table(rows: list[dict]) -> str:
    """Render ablation rows as a TSV table."""
    cols = ["param", "value", "precision", "recall", "f1", "ap25", "ap50", "ap",
            "s_assoc", "n_pred", "n_gt", "wall_time"]
    lines = ["\t".join(cols)]
    for row in rows:
        lines.append("\t".join(_format_cell(row.get(c)) for c in cols))
    return "\n".join(lines) + "\n"


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def dump_chunk_graph(config: PipelineConfig, chunk_index: int, path) -> None:
    """Recompute one chunk's similarity graph and write its edge list."""
    config.validate()
    inputs = _load_inputs(config)
    amap = aggregate(inputs.scans, inputs.poses, config.map_voxel)
    chunks = extract_chunks(amap, config.chunk_edge, config.chunk_stride, config.ncut_voxel)
    if not 0 <= chunk_index < len(chunks):
        raise DataError(f"chunk index {chunk_index} out of range ({len(chunks)} chunks)")
    chunk = chunks[chunk_index]
    ground = estimate_ground(chunk.raw_points, config.ground_cell, config.ground_iters,
                             config.ground_tol, config.ground_margin,
                             seed=config.seed + 7919 * chunk_index)
    non_ground = np.flatnonzero(~ground.is_ground)
    if non_ground.size == 0:
        raise DataError(f"chunk {chunk_index} has no non-ground points")
    ds_points, _ = voxel_downsample(chunk.raw_points[non_ground], config.ncut_voxel)
    channels = _chunk_channels(config, ds_points, inputs)
    from .features import spatial_channel
    from .graph import build_graph
    graph = build_graph(ds_points, [spatial_channel(ds_points, config.theta_s)] + channels,
                        radius=config.radius, w_floor=config.w_floor)
    _io.write_edge_list(path, graph)
