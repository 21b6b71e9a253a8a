"""Binary and text file formats used at pipeline boundaries.

All binary payloads are little-endian. Loaders are strict: truncated or
malformed files raise DataError with the offending path in the message.

Formats:
  * scan file: N * 4 float32 records (x, y, z, intensity)
  * pose file: text, one line per pose, 12 reals (row-major 3x4 [R|t])
  * label file: N uint32, instance id in the upper 16 bits
  * feature file: magic "AIFB", version, kind byte, N, D, N*D float32
  * grid file: magic "AIFG", version, rows, cols, dim, scale, payload
  * camera file: text, one line per camera, 12 reals (3x4 projection)
    followed by two integers (image width, height)
  * PLY export: binary_little_endian 1.0, xyz float + rgb uchar
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

FEATURE_MAGIC = b"AIFB"
GRID_MAGIC = b"AIFG"
FORMAT_VERSION = 1

FEATURE_KIND_CODES = {"P": 1, "I": 2}
FEATURE_KIND_NAMES = {1: "P", 2: "I"}


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    return path.read_bytes()


# ---------------------------------------------------------------------------
# point scans


def read_scan_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a raw scan file, returning (points (n, 3), intensity (n,))."""
    blob = _read_bytes(path)
    if len(blob) % 16 != 0:
        raise DataError(f"scan file size {len(blob)} is not a multiple of 16: {path}")
    data = np.frombuffer(blob, dtype="<f4").reshape(-1, 4).astype(np.float64)
    if data.size and not np.isfinite(data).all():
        raise DataError(f"scan file contains non-finite values: {path}")
    return np.ascontiguousarray(data[:, :3]), np.ascontiguousarray(data[:, 3])


def write_scan_file(path, points, intensity=None) -> None:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if intensity is None:
        intensity = np.zeros(len(points))
    intensity = np.asarray(intensity, dtype=np.float64).ravel()
    if intensity.shape[0] != points.shape[0]:
        raise DataError("intensity length does not match point count")
    data = np.empty((len(points), 4), dtype="<f4")
    data[:, :3] = points
    data[:, 3] = intensity
    Path(path).write_bytes(data.tobytes())


# ---------------------------------------------------------------------------
# poses


def read_pose_file(path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read a trajectory file, returning a list of (rotation, translation)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    poses = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 12:
            raise DataError(f"pose line {ln} has {len(parts)} fields, expected 12: {path}")
        try:
            vals = np.array([float(p) for p in parts], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"pose line {ln} is not numeric: {path}") from exc
        mat = vals.reshape(3, 4)
        poses.append((np.ascontiguousarray(mat[:, :3]), np.ascontiguousarray(mat[:, 3])))
    return poses


def write_pose_file(path, poses) -> None:
    lines = []
    for rotation, translation in poses:
        mat = np.hstack([np.asarray(rotation, dtype=np.float64).reshape(3, 3),
                         np.asarray(translation, dtype=np.float64).reshape(3, 1)])
        lines.append(" ".join(repr(float(v)) for v in mat.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# instance labels


def read_label_file(path) -> np.ndarray:
    """Read per-point instance ids (upper 16 bits of each uint32)."""
    blob = _read_bytes(path)
    if len(blob) % 4 != 0:
        raise DataError(f"label file size {len(blob)} is not a multiple of 4: {path}")
    raw = np.frombuffer(blob, dtype="<u4")
    return (raw >> 16).astype(np.int64)


def write_label_file(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() > 0xFFFF):
        raise DataError("instance ids must fit in 16 bits")
    raw = (labels.astype(np.uint32) << np.uint32(16)).astype("<u4")
    Path(path).write_bytes(raw.tobytes())


# ---------------------------------------------------------------------------
# point feature files


def write_feature_file(path, kind: str, vectors) -> None:
    """Write a point feature bank. Absent rows are all-NaN."""
    if kind not in FEATURE_KIND_CODES:
        raise DataError(f"unknown feature kind {kind!r}")
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise DataError(f"feature vectors must be 2-d, got shape {vectors.shape}")
    n, d = vectors.shape
    if d == 0:
        raise DataError("feature dimension must be positive")
    header = FEATURE_MAGIC + struct.pack("<IBII", FORMAT_VERSION, FEATURE_KIND_CODES[kind], n, d)
    Path(path).write_bytes(header + vectors.astype("<f4").tobytes())


def read_feature_file(path) -> tuple[str, np.ndarray]:
    """Read a point feature bank, returning (kind, vectors (n, d) float64)."""
    blob = _read_bytes(path)
    head_len = 4 + 4 + 1 + 4 + 4
    if len(blob) < head_len:
        raise DataError(f"feature file truncated header: {path}")
    if blob[:4] != FEATURE_MAGIC:
        raise DataError(f"bad feature file magic {blob[:4]!r}: {path}")
    version, kind_code, n, d = struct.unpack("<IBII", blob[4:head_len])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported feature file version {version}: {path}")
    if kind_code not in FEATURE_KIND_NAMES:
        raise DataError(f"unknown feature kind code {kind_code}: {path}")
    if d == 0:
        raise DataError(f"feature dimension is zero: {path}")
    expect = head_len + 4 * n * d
    if len(blob) != expect:
        raise DataError(f"feature file size {len(blob)} != expected {expect}: {path}")
    vectors = np.frombuffer(blob, dtype="<f4", offset=head_len).reshape(n, d).astype(np.float64)
    return FEATURE_KIND_NAMES[kind_code], vectors


# ---------------------------------------------------------------------------
# image feature grids


def write_grid_file(path, values, fmap_scale: float) -> None:
    """Write an image feature grid of shape (rows, cols, dim)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3:
        raise DataError(f"grid values must be 3-d, got shape {values.shape}")
    rows, cols, dim = values.shape
    if dim == 0:
        raise DataError("grid dimension must be positive")
    header = GRID_MAGIC + struct.pack("<IIIIf", FORMAT_VERSION, rows, cols, dim, float(fmap_scale))
    Path(path).write_bytes(header + values.astype("<f4").tobytes())


def read_grid_file(path) -> tuple[np.ndarray, float]:
    """Read an image feature grid, returning (values (rows, cols, dim), scale)."""
    blob = _read_bytes(path)
    head_len = 4 + 4 * 4 + 4
    if len(blob) < head_len:
        raise DataError(f"grid file truncated header: {path}")
    if blob[:4] != GRID_MAGIC:
        raise DataError(f"bad grid file magic {blob[:4]!r}: {path}")
    version, rows, cols, dim, scale = struct.unpack("<IIIIf", blob[4:head_len])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported grid file version {version}: {path}")
    if dim == 0:
        raise DataError(f"grid dimension is zero: {path}")
    expect = head_len + 4 * rows * cols * dim
    if len(blob) != expect:
        raise DataError(f"grid file size {len(blob)} != expected {expect}: {path}")
    values = np.frombuffer(blob, dtype="<f4", offset=head_len).reshape(rows, cols, dim).astype(np.float64)
    if scale <= 0 or not np.isfinite(scale):
        raise DataError(f"grid scale must be positive: {path}")
    return values, float(scale)


# ---------------------------------------------------------------------------
# cameras


def read_camera_file(path) -> list[tuple[np.ndarray, int, int]]:
    """Read camera definitions, one per line: 12 reals + width + height."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    cameras = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 14:
            raise DataError(f"camera line {ln} has {len(parts)} fields, expected 14: {path}")
        try:
            proj = np.array([float(p) for p in parts[:12]], dtype=np.float64).reshape(3, 4)
            width, height = int(parts[12]), int(parts[13])
        except ValueError as exc:
            raise DataError(f"camera line {ln} is not numeric: {path}") from exc
        if width <= 0 or height <= 0:
            raise DataError(f"camera line {ln} has non-positive image size: {path}")
        cameras.append((proj, width, height))
    return cameras


def write_camera_file(path, cameras) -> None:
    lines = []
    for proj, width, height in cameras:
        proj = np.asarray(proj, dtype=np.float64).reshape(3, 4)
        lines.append(" ".join(repr(float(v)) for v in proj.ravel()) + f" {int(width)} {int(height)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# colored PLY export


def instance_color(label: int) -> tuple[int, int, int]:
    """Deterministic RGB for an instance id; id 0 renders mid-gray."""
    if label == 0:
        return (128, 128, 128)
    # splitmix-style integer hash, stable across platforms
    mask = 0xFFFFFFFFFFFFFFFF
    h = (int(label) * 0x9E3779B97F4A7C15) & mask
    h ^= h >> 31
    h = (h * 0xBF58476D1CE4E5B9) & mask
    h ^= h >> 27
    r = 64 + (h & 0xBF)
    g = 64 + ((h >> 8) & 0xBF)
    b = 64 + ((h >> 16) & 0xBF)
    return (r, g, b)


def write_ply(path, points, labels) -> None:
    """Write a binary PLY of points colored by instance id."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.shape[0] != points.shape[0]:
        raise DataError("labels length does not match point count")
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(points)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    rec = np.empty(len(points), dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
    rec["xyz"] = points
    uniq = np.unique(labels)
    lut = {int(u): instance_color(int(u)) for u in uniq}
    rec["rgb"] = np.array([lut[int(v)] for v in labels], dtype=np.uint8).reshape(-1, 3)
    Path(path).write_bytes(header.encode("ascii") + rec.tobytes())


def read_ply(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back a PLY written by write_ply, returning (points, colors)."""
    blob = _read_bytes(path)
    marker = b"end_header\n"
    pos = blob.find(marker)
    if pos < 0:
        raise DataError(f"PLY header terminator missing: {path}")
    header = blob[:pos].decode("ascii", errors="replace")
    count = None
    for line in header.splitlines():
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
    if count is None:
        raise DataError(f"PLY vertex count missing: {path}")
    body = blob[pos + len(marker):]
    rec = np.frombuffer(body, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)], count=count)
    return rec["xyz"].astype(np.float64), rec["rgb"].copy()


# ---------------------------------------------------------------------------
# debug edge list


def write_edge_list(path, graph) -> None:
    """Write graph edges as text lines "p q w", lexicographically sorted."""
    coo = graph.matrix.tocoo()
    mask = coo.row < coo.col
    order = np.lexsort((coo.col[mask], coo.row[mask]))
    rows = coo.row[mask][order]
    cols = coo.col[mask][order]
    data = coo.data[mask][order]
    lines = [f"{int(p)} {int(q)} {w:.17g}" for p, q, w in zip(rows, cols, data)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
