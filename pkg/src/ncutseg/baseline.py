"""Density-based euclidean clustering baseline.

A point is a core point when at least min_pts points (itself included)
lie within the closed eps-ball around it. Clusters are the connected
components of core points under the eps relation; border points join the
cluster of their lowest-index reachable core point; everything else is
noise (label 0). Cluster ids are dense 1..K ordered by each cluster's
lowest contained core index, which makes the labeling order-independent.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import DataError
from .validation import check_points, check_positive

EPS = 1.0
MIN_PTS = 5


def euclidean_cluster(points: np.ndarray, eps: float = EPS, min_pts: int = MIN_PTS) -> np.ndarray:
    """Cluster points by density reachability; returns labels, 0 = noise."""
    points = check_points(points)
    eps = check_positive(eps, "eps")
    min_pts = int(min_pts)
    if min_pts < 1:
        raise DataError("min_pts must be at least 1")
    n = points.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=eps, output_type="ndarray")
    counts = np.ones(n, dtype=np.int64)  # each point neighbors itself
    if pairs.size:
        np.add.at(counts, pairs[:, 0], 1)
        np.add.at(counts, pairs[:, 1], 1)
    core = counts >= min_pts
    labels = np.zeros(n, dtype=np.int64)
    if not core.any():
        return labels
    core_idx = np.flatnonzero(core)
    rank = np.full(n, -1, dtype=np.int64)
    rank[core_idx] = np.arange(core_idx.size)
    if pairs.size:
        cc_mask = core[pairs[:, 0]] & core[pairs[:, 1]]
        rows = rank[pairs[cc_mask, 0]]
        cols = rank[pairs[cc_mask, 1]]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(core_idx.size, core_idx.size))
    _, comp = connected_components(adj, directed=False)
    # dense ids ordered by the lowest core index in each component
    # (core_idx is ascending, so first appearance = lowest core index)
    order = {}
    for c in comp:
        if c not in order:
            order[c] = len(order) + 1
    labels[core_idx] = np.array([order[c] for c in comp], dtype=np.int64)
    # border points: lowest-index core neighbor decides
    if pairs.size:
        border_sources = np.concatenate([pairs[:, 0], pairs[:, 1]])
        border_targets = np.concatenate([pairs[:, 1], pairs[:, 0]])
        sel = ~core[border_sources] & core[border_targets]
        src = border_sources[sel]
        dst = border_targets[sel]
        if src.size:
            lowest = {}
            for s, d in zip(src, dst):
                if s not in lowest or d < lowest[s]:
                    lowest[s] = d
            for s, d in lowest.items():
                labels[s] = labels[d]
    return labels


class DensityCluster(BaseEstimator, ClusterMixin):
    """Estimator wrapper around euclidean_cluster.

    labels_ uses 0 for noise and dense ids 1..K for clusters, matching
    the instance labeling convention of the rest of the pipeline.
    """

    def __init__(self, eps: float = EPS, min_pts: int = MIN_PTS):
        self.eps = eps
        self.min_pts = min_pts

    def fit(self, X, y=None):
        self.labels_ = euclidean_cluster(X, self.eps, self.min_pts)
        self.n_clusters_ = int(self.labels_.max()) if self.labels_.size else 0
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).labels_
