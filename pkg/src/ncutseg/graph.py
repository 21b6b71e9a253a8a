"""Sparse multi-channel similarity graphs over downsampled chunk points.

Edges connect point pairs within a fixed radius. Each edge weight is the
product over channels of exp(-theta * ||x_p - x_q||^2); a channel where
either endpoint is absent contributes a factor of one. Weights below a
floor are dropped to keep the graph sparse.

Channels are combined in the canonical order S, P, I regardless of how
the caller passes them, so the weight product is reproducible bit for bit
under channel permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import DataError
from .features import CHANNEL_KINDS, FeatureChannel
from .validation import check_points, check_positive

RADIUS = 1.0
W_FLOOR = 1e-8


@dataclass
class ProxyGraph:
    """Symmetric weighted adjacency over graph nodes.

    node_to_point maps each node to the caller's point index, so graphs
    built on a subset (for example non-ground points) stay traceable.
    """

    matrix: sp.csr_matrix
    node_to_point: np.ndarray = field(default=None)

    def __post_init__(self):
        if not sp.issparse(self.matrix):
            raise DataError("graph matrix must be sparse")
        self.matrix = self.matrix.tocsr()
        self.matrix.sort_indices()
        n, m = self.matrix.shape
        if n != m:
            raise DataError("graph matrix must be square")
        if self.node_to_point is None:
            self.node_to_point = np.arange(n, dtype=np.int64)
        self.node_to_point = np.asarray(self.node_to_point, dtype=np.int64).ravel()
        if self.node_to_point.shape[0] != n:
            raise DataError("node_to_point length does not match matrix")
        if self.matrix.nnz:
            if (self.matrix != self.matrix.T).nnz != 0:
                raise DataError("graph matrix must be symmetric")
            if self.matrix.diagonal().any():
                raise DataError("graph must not contain self loops")
            data = self.matrix.data
            if data.size and (data.min() <= 0 or data.max() > 1.0):
                raise DataError("edge weights must lie in (0, 1]")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_edges(self) -> int:
        return self.matrix.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def subgraph(self, nodes: np.ndarray) -> "ProxyGraph":
        nodes = np.asarray(nodes, dtype=np.int64)
        sub = self.matrix[nodes][:, nodes]
        return ProxyGraph(sub, self.node_to_point[nodes])


def radius_neighbors(points: np.ndarray, radius: float = RADIUS) -> np.ndarray:
    """All point pairs within the closed ball of the given radius.

    Returns an (m, 2) index array with i < j, sorted lexicographically.
    """
    points = check_points(points)
    radius = check_positive(radius, "radius")
    if points.shape[0] < 2:
        return np.zeros((0, 2), dtype=np.int64)
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=radius, output_type="ndarray").astype(np.int64)
    if pairs.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    order = np.lexsort((hi, lo))
    return np.column_stack([lo, hi])[order]


def _pair_factors(channel: FeatureChannel, pi: np.ndarray, qi: np.ndarray) -> np.ndarray:
    """Per-pair channel factors; pairs with an absent endpoint get one."""
    if channel.theta is None:
        raise DataError(f"channel {channel.kind} has no theta")
    vec = channel.vectors
    present = channel.present
    both = present[pi] & present[qi]
    out = np.ones(pi.shape[0])
    if both.any():
        diff = vec[pi[both]] - vec[qi[both]]
        out[both] = np.exp(-channel.theta * np.einsum("ij,ij->i", diff, diff))
    return out


def channel_weight(xp, xq, theta: float) -> float:
    """Similarity of two feature vectors: exp(-theta * ||xp - xq||^2)."""
    theta = check_positive(theta, "theta")
    xp = np.asarray(xp, dtype=np.float64).ravel()
    xq = np.asarray(xq, dtype=np.float64).ravel()
    if xp.shape != xq.shape:
        raise DataError("feature vectors differ in dimension")
    diff = xp - xq
    return float(np.exp(-theta * float(diff @ diff)))


def _canonical(channels) -> list[FeatureChannel]:
    order = {k: i for i, k in enumerate(CHANNEL_KINDS)}
    chans = list(channels)
    kinds = [c.kind for c in chans]
    if len(set(kinds)) != len(kinds):
        raise DataError("duplicate channel kinds")
    return sorted(chans, key=lambda c: order[c.kind])


def edge_weight(channels, p: int, q: int) -> float:
    """Product of channel similarities for one point pair.

    Channels where either endpoint is absent contribute a factor of one.
    """
    w = 1.0
    for channel in _canonical(channels):
        if channel.theta is None:
            raise DataError(f"channel {channel.kind} has no theta")
        present = channel.present
        if present[p] and present[q]:
            w *= channel_weight(channel.vectors[p], channel.vectors[q], channel.theta)
    return w


def build_graph(points: np.ndarray, channels, radius: float = RADIUS,
                w_floor: float = W_FLOOR, node_to_point: np.ndarray | None = None) -> ProxyGraph:
    """Build the similarity graph over the given points.

    `channels` must contain at least the S channel; all channels must have
    one vector per point and a set theta. Edges whose combined weight
    falls below w_floor are dropped.
    """
    points = check_points(points)
    w_floor = float(w_floor)
    if w_floor < 0:
        raise DataError("w_floor must be non-negative")
    chans = _canonical(channels)
    if not chans:
        raise DataError("at least one channel is required")
    n = points.shape[0]
    for c in chans:
        if c.n != n:
            raise DataError(f"channel {c.kind} has {c.n} rows for {n} points")
    pairs = radius_neighbors(points, radius)
    pi, qi = pairs[:, 0], pairs[:, 1]
    weights = np.ones(pairs.shape[0])
    for c in chans:
        weights *= _pair_factors(c, pi, qi)
    keep = weights >= w_floor
    pi, qi, weights = pi[keep], qi[keep], weights[keep]
    rows = np.concatenate([pi, qi])
    cols = np.concatenate([qi, pi])
    data = np.concatenate([weights, weights])
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return ProxyGraph(matrix, node_to_point)
