"""Pipeline configuration: JSON files plus key=value overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

# eigenvalue recursion threshold per channel preset
EIG_THRESHOLD_PRESETS = {"S": 0.075, "S+P": 0.03, "S+P+I": 0.005}
METHODS = ("ncut", "dbscan")


@dataclass
class PipelineConfig:
    scans_dir: str = ""
    poses_path: str = ""
    output_dir: str = "out"
    features_dir: str | None = None
    cameras_path: str | None = None
    grids_dir: str | None = None
    gt_labels_path: str | None = None
    preset: str = "S"
    method: str = "ncut"
    theta_s: float = 1.0
    theta_p: float = 0.5
    theta_i: float = 0.1
    radius: float = 1.0
    w_floor: float = 1e-8
    map_voxel: float = 0.05
    ncut_voxel: float = 0.35
    chunk_edge: float = 25.0
    chunk_stride: float = 22.0
    eig_threshold: float | None = None  # None resolves from the preset
    min_share: float = 0.01
    min_points: int = 2
    sweep_points: int = 64
    eig_tol: float = 1e-8
    eig_max_iter: int = 5000
    merge_iou: float = 0.01
    ground_cell: float = 2.0
    ground_iters: int = 100
    ground_tol: float = 0.1
    ground_margin: float = 0.2
    hpr_gamma: float = 2.0
    feature_radius: float = 0.35
    dbscan_eps: float = 1.0
    dbscan_min_pts: int = 5
    workers: int = 1
    seed: int = 0

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(self.preset.split("+"))

    def resolved_eig_threshold(self) -> float:
        if self.eig_threshold is not None:
            return float(self.eig_threshold)
        return EIG_THRESHOLD_PRESETS[self.preset]

    def validate(self) -> None:
        if self.preset not in EIG_THRESHOLD_PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose one of {sorted(EIG_THRESHOLD_PRESETS)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose one of {METHODS}")
        if not self.scans_dir or not self.poses_path:
            raise ConfigError("scans_dir and poses_path are required")
        positive = ["theta_s", "theta_p", "theta_i", "radius", "map_voxel", "ncut_voxel",
                    "chunk_edge", "chunk_stride", "eig_tol", "merge_iou", "ground_cell",
                    "ground_tol", "hpr_gamma", "feature_radius", "dbscan_eps"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.w_floor < 0 or self.ground_margin < 0:
            raise ConfigError("w_floor and ground_margin must be non-negative")
        if not 0 <= self.min_share <= 1:
            raise ConfigError("min_share must lie in [0, 1]")
        if self.min_points < 1 or self.sweep_points < 1 or self.eig_max_iter < 1:
            raise ConfigError("min_points, sweep_points, eig_max_iter must be at least 1")
        if self.dbscan_min_pts < 1 or self.ground_iters < 1:
            raise ConfigError("dbscan_min_pts and ground_iters must be at least 1")
        if self.workers < 0:
            raise ConfigError("workers must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.eig_threshold is not None and self.eig_threshold < 0:
            raise ConfigError("eig_threshold must be non-negative")
        if "P" in self.channels and not self.features_dir:
            raise ConfigError("preset includes P but features_dir is not set")
        if "I" in self.channels and not (self.cameras_path and self.grids_dir):
            raise ConfigError("preset includes I but cameras_path/grids_dir are not set")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be an object: {path}")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def with_overrides(self, overrides: dict[str, str]) -> "PipelineConfig":
        """Apply key=value overrides; dots in keys map to underscores."""
        data = self.as_dict()
        fields = {f.name: f for f in dataclasses.fields(self)}
        for raw_key, raw_value in overrides.items():
            key = raw_key.replace(".", "_")
            if key not in fields:
                raise ConfigError(f"unknown config key {raw_key!r}")
            data[key] = _parse_value(raw_value, data[key], key)
        return PipelineConfig(**data)


def _parse_value(text: str, current, key: str):
    """Parse an override string against the current value's type."""
    if isinstance(text, (int, float, bool)) or text is None:
        return text
    lowered = text.strip().lower()
    if lowered in ("none", "null"):
        return None
    if isinstance(current, bool):
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean for {key!r}: {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse integer for {key!r}: {text!r}") from exc
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse number for {key!r}: {text!r}") from exc
    if current is None:
        # untyped slot: numbers first, else string
        for cast in (int, float):
            try:
                return cast(text)
            except ValueError:
                pass
        return text
    return text
