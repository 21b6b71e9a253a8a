"""Label-free instance segmentation of aggregated LiDAR maps.

The package segments dense point cloud maps without training labels:
multi-modal similarity graphs over trajectory chunks, recursive
normalized cuts with spectral stopping rules, cross-chunk instance
merging, and a metric suite for point-level instance evaluation.
"""

from .baseline import DensityCluster, euclidean_cluster
from .config import EIG_THRESHOLD_PRESETS, PipelineConfig
from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .features import (CameraModel, FeatureChannel, FeatureMapGrid,
                       aggregate_point_features, build_view_index,
                       hidden_point_removal, load_feature_file,
                       project_image_features, spatial_channel,
                       write_feature_file)
from .graph import ProxyGraph, build_graph, channel_weight, edge_weight, radius_neighbors
from .ground import GroundFilter, GroundMask, estimate_ground
from .merge import Aabb, MapSegmentation, box_iou, merge_chunks
from .metrics import (EvalReport, MatchMatrix, average_precision, ap_global,
                      evaluate, match_matrix, precision_recall_f1,
                      proposal_confidence, s_assoc)
from .ncut import (CutResult, NormalizedCutsClustering, best_split,
                   brute_force_min_ncut, connected_components, fiedler_vector,
                   ncut_value, recursive_ncut)
from .pipeline import RunResult, ablate, dump_chunk_graph, run
from .scene import (AggregatedMap, Chunk, PointCloud, RigidPose, aggregate,
                    extract_chunks, load_scan, transfer_labels, voxel_downsample)
from .synthetic import SceneSpec, SyntheticScene, aabb_gap, generate_scene, write_scene

__version__ = "0.1.0"

__all__ = [
    "Aabb", "AggregatedMap", "CameraModel", "Chunk", "ConfigError",
    "ConvergenceError", "CutResult", "DataError", "DensityCluster",
    "EIG_THRESHOLD_PRESETS", "EvalReport", "FeatureChannel", "FeatureMapGrid",
    "GroundFilter", "GroundMask", "MapSegmentation", "MatchMatrix",
    "NormalizedCutsClustering", "NumericalError", "PipelineConfig",
    "PointCloud", "ProxyGraph", "RigidPose", "RunResult", "SceneSpec",
    "SyntheticScene", "aabb_gap", "aggregate", "aggregate_point_features",
    "ap_global", "average_precision", "best_split", "box_iou",
    "brute_force_min_ncut", "build_graph", "build_view_index",
    "channel_weight", "connected_components", "edge_weight", "estimate_ground",
    "euclidean_cluster", "evaluate", "extract_chunks", "fiedler_vector",
    "generate_scene", "hidden_point_removal", "load_feature_file", "load_scan",
    "match_matrix", "merge_chunks", "ncut_value", "precision_recall_f1",
    "project_image_features", "proposal_confidence", "radius_neighbors",
    "recursive_ncut", "run", "s_assoc", "spatial_channel", "transfer_labels",
    "voxel_downsample", "write_feature_file", "write_scene", "ablate",
    "dump_chunk_graph",
]
