"""Recursive normalized cuts over similarity graphs.

The Fiedler pair of the generalized problem (D - W) y = lambda D y is
computed on the symmetrically normalized operator
N = D^{-1/2} (D - W) D^{-1/2}, whose known null vector D^{1/2} 1 is
deflated explicitly. Small regions use a dense symmetric eigensolver;
larger ones use an inverse-free iterative solve (LOBPCG) with the null
vector as an orthogonality constraint. Every accepted pair must satisfy
the residual contract ||(D - W) y - lambda D y|| <= tol * ||D y|| in the
original (unnormalized) space, otherwise the solve fails loudly.

Bipartitions come from sweeping thresholds over the Fiedler vector and
keeping the one with the smallest normalized cut value. Recursion stops
on the eigenvalue threshold, a minimum region share of the root node
count, or a minimum region size.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.linalg import LinearOperator, lobpcg
from sklearn.base import BaseEstimator, ClusterMixin

from .errors import ConvergenceError, DataError
from .features import spatial_channel
from .graph import ProxyGraph, build_graph
from .validation import check_positive

logger = logging.getLogger(__name__)

EIG_TOL = 1e-8
EIG_MAX_ITER = 5000
SWEEP_POINTS = 64
MIN_SHARE = 0.01
MIN_POINTS = 2

# regions at or below this size take the dense eigensolver path
_DENSE_N = 128
# largest region for which a failed iterative solve falls back to dense
_DENSE_FALLBACK_N = 4096


@dataclass
class CutResult:
    assignment: np.ndarray  # bool, True = side A
    ncut_value: float
    lambda2: float


def connected_components(graph: ProxyGraph) -> tuple[int, np.ndarray]:
    """Connected components of the graph as (count, labels)."""
    count, labels = _cc(graph.matrix, directed=False)
    return int(count), labels.astype(np.int64)


def _residual(matrix: sp.csr_matrix, degrees: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Relative residual of (D - W) y = lambda D y."""
    dy = degrees * y
    r = dy - matrix @ y - lam * dy
    denom = np.linalg.norm(dy)
    if denom == 0:
        return float("inf")
    return float(np.linalg.norm(r) / denom)


def fiedler_vector(graph: ProxyGraph | sp.spmatrix, tol: float = EIG_TOL,
                   max_iter: int = EIG_MAX_ITER, seed: int = 7) -> tuple[float, np.ndarray]:
    """Second-smallest eigenpair of (D - W) y = lambda D y.

    Requires a connected graph with at least two nodes. The returned
    vector has unit norm, satisfies the residual contract at `tol`, and is
    D-orthogonal to the constant vector. The sign is fixed so the largest
    magnitude component is positive.
    """
    matrix = graph.matrix if isinstance(graph, ProxyGraph) else sp.csr_matrix(graph)
    n = matrix.shape[0]
    if n < 2:
        raise DataError("fiedler_vector needs at least two nodes")
    degrees = np.asarray(matrix.sum(axis=1)).ravel()
    if (degrees <= 0).any():
        raise DataError("graph has isolated nodes; split components first")
    tol = check_positive(tol, "tol")

    sqrt_d = np.sqrt(degrees)
    inv_sqrt_d = 1.0 / sqrt_d
    null_vec = sqrt_d / np.linalg.norm(sqrt_d)

    def _accept(lam: float, z: np.ndarray) -> tuple[float, np.ndarray] | None:
        z = z - (z @ null_vec) * null_vec
        norm = np.linalg.norm(z)
        if norm == 0:
            return None
        z = z / norm
        y = inv_sqrt_d * z
        y = y / np.linalg.norm(y)
        res = _residual(matrix, degrees, y, lam)
        if res > tol:
            return None
        pivot = int(np.argmax(np.abs(y)))
        if y[pivot] < 0:
            y = -y
        return float(lam), y

    def _dense() -> tuple[float, np.ndarray]:
        normalized = -(inv_sqrt_d[:, None] * matrix.toarray() * inv_sqrt_d[None, :])
        np.fill_diagonal(normalized, normalized.diagonal() + 1.0)
        vals, vecs = scipy.linalg.eigh(normalized)
        accepted = _accept(vals[1], vecs[:, 1])
        if accepted is None:
            res = _residual(matrix, degrees, inv_sqrt_d * vecs[:, 1], vals[1])
            raise ConvergenceError(
                f"dense eigensolver missed the residual contract (residual {res:.3e})", res)
        return accepted

    if n <= _DENSE_N:
        return _dense()

    def _matvec(z):
        z = z.reshape(n, -1)
        return z - inv_sqrt_d[:, None] * (matrix @ (inv_sqrt_d[:, None] * z))

    operator = LinearOperator((n, n), matvec=_matvec, matmat=_matvec, dtype=np.float64)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, 1))
    x0 -= (null_vec @ x0) * null_vec[:, None]
    try:
        with np.errstate(all="ignore"):
            vals, vecs = lobpcg(operator, x0, Y=null_vec[:, None], tol=tol * 1e-2,
                                maxiter=max_iter, largest=False)
        accepted = _accept(float(vals[0]), vecs[:, 0])
        if accepted is not None:
            return accepted
    except Exception:  # lobpcg can fail outright on adversarial spectra
        accepted = None
    if n <= _DENSE_FALLBACK_N:
        return _dense()
    raise ConvergenceError(f"eigensolver failed to converge for n={n}", float("nan"))


def ncut_value(graph: ProxyGraph, assignment: np.ndarray) -> float:
    """Normalized cut value cut/assoc(A) + cut/assoc(B) of a bipartition."""
    assignment = np.asarray(assignment, dtype=bool).ravel()
    if assignment.shape[0] != graph.n:
        raise DataError("assignment length does not match graph")
    if assignment.all() or not assignment.any():
        raise DataError("both sides of a bipartition must be non-empty")
    degrees = graph.degrees()
    a = assignment.astype(np.float64)
    cut = float(a @ (graph.matrix @ (1.0 - a)))
    total = 0.0
    for side in (assignment, ~assignment):
        assoc = float(degrees[side].sum())
        if assoc > 0:
            total += cut / assoc
        # an isolated side has zero cut as well; it contributes nothing
    return total


def best_split(graph: ProxyGraph, y: np.ndarray, sweep_points: int = SWEEP_POINTS,
               lambda2: float = float("nan")) -> CutResult:
    """Best threshold bipartition of the Fiedler vector.

    Sweeps evenly spaced quantiles of y; value ties resolve toward the
    more balanced split, then toward the lower threshold.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = graph.n
    if y.shape[0] != n:
        raise DataError("vector length does not match graph")
    if n < 2:
        raise DataError("cannot split fewer than two nodes")
    qs = np.arange(1, sweep_points + 1) / (sweep_points + 1.0)
    thresholds = np.quantile(y, qs)
    best: CutResult | None = None
    best_balance = None
    seen = set()
    for t in thresholds:
        mask = y <= t
        size_a = int(mask.sum())
        if size_a == 0 or size_a == n:
            continue
        key = mask.tobytes()
        if key in seen:
            continue
        seen.add(key)
        value = ncut_value(graph, mask)
        balance = abs(n - 2 * size_a)
        if best is None:
            best = CutResult(mask, value, lambda2)
            best_balance = balance
            continue
        tie_band = 1e-12 * max(1.0, abs(best.ncut_value))
        if value < best.ncut_value - tie_band:
            best = CutResult(mask, value, lambda2)
            best_balance = balance
        elif abs(value - best.ncut_value) <= tie_band and balance < best_balance:
            best = CutResult(mask, value, lambda2)
            best_balance = balance
    if best is None:
        raise DataError("no admissible threshold split (constant vector)")
    return best


def brute_force_min_ncut(graph: ProxyGraph) -> tuple[np.ndarray, float]:
    """Exact minimum normalized cut by enumerating all bipartitions.

    Intended for oracle checks on small graphs. Node 0 is fixed to side B,
    which enumerates each unordered bipartition exactly once. Ties keep
    the first (lowest enumeration index) assignment.
    """
    n = graph.n
    if n < 2:
        raise DataError("need at least two nodes")
    if n > 20:
        raise DataError("brute force is limited to 20 nodes")
    dense = graph.matrix.toarray()
    degrees = dense.sum(axis=1)
    best_mask = None
    best_value = np.inf
    for bits in range(1, 1 << (n - 1)):
        mask = np.array([(bits >> k) & 1 for k in range(n - 1)] + [0], dtype=bool)
        a = mask.astype(np.float64)
        cut = float(a @ dense @ (1.0 - a))
        value = 0.0
        for side in (mask, ~mask):
            assoc = float(degrees[side].sum())
            if assoc > 0:
                value += cut / assoc
        if value < best_value:
            best_value = value
            best_mask = mask
    return best_mask, float(best_value)


def recursive_ncut(graph: ProxyGraph, eig_threshold: float, min_share: float = MIN_SHARE,
                   min_points: int = MIN_POINTS, sweep_points: int = SWEEP_POINTS,
                   tol: float = EIG_TOL, max_iter: int = EIG_MAX_ITER,
                   seed: int = 7) -> np.ndarray:
    """Partition the graph into instances by recursive bipartition.

    Returns dense labels 1..K per node. Connected components are always
    separated. A region becomes terminal when it is smaller than
    min_points, its lambda2 exceeds eig_threshold, the candidate split
    would leave a side below min_share of the root node count, or the
    eigensolve fails. Instance ids follow the lowest contained node index.
    """
    if graph.n == 0:
        return np.zeros(0, dtype=np.int64)
    if min_share < 0 or min_share > 1:
        raise DataError("min_share must lie in [0, 1]")
    root_n = graph.n
    min_side = min_share * root_n
    terminal: list[np.ndarray] = []
    queue: deque[np.ndarray] = deque([np.arange(root_n, dtype=np.int64)])
    while queue:
        region = queue.popleft()
        if region.size < max(min_points, 2):
            terminal.append(region)
            continue
        sub = graph.subgraph(region)
        n_comp, comp_labels = connected_components(sub)
        if n_comp > 1:
            for c in range(n_comp):
                queue.append(region[comp_labels == c])
            continue
        try:
            lam, y = fiedler_vector(sub, tol=tol, max_iter=max_iter, seed=seed)
        except ConvergenceError as exc:
            logger.warning("eigensolve failed on region of %d nodes: %s", region.size, exc)
            terminal.append(region)
            continue
        if lam > eig_threshold:
            terminal.append(region)
            continue
        cut = best_split(sub, y, sweep_points=sweep_points, lambda2=lam)
        side_a = region[cut.assignment]
        side_b = region[~cut.assignment]
        if min(side_a.size, side_b.size) < min_side:
            terminal.append(region)
            continue
        queue.append(side_a)
        queue.append(side_b)
    terminal.sort(key=lambda r: int(r.min()))
    labels = np.zeros(root_n, dtype=np.int64)
    for idx, region in enumerate(terminal, start=1):
        labels[region] = idx
    return labels


class NormalizedCutsClustering(BaseEstimator, ClusterMixin):
    """Clusterer running recursive normalized cuts over a radius graph.

    The spatial channel is built from the input coordinates; additional
    feature channels (P, I) with set thetas can be passed to fit. After
    fitting, labels_ holds dense instance ids 1..K (singletons included)
    and graph_ the similarity graph the cut ran on.
    """

    def __init__(self, radius: float = 1.0, theta_s: float = 1.0, eig_threshold: float = 0.075,
                 min_share: float = MIN_SHARE, min_points: int = MIN_POINTS,
                 w_floor: float = 1e-8, sweep_points: int = SWEEP_POINTS,
                 tol: float = EIG_TOL, max_iter: int = EIG_MAX_ITER, seed: int = 7):
        self.radius = radius
        self.theta_s = theta_s
        self.eig_threshold = eig_threshold
        self.min_share = min_share
        self.min_points = min_points
        self.w_floor = w_floor
        self.sweep_points = sweep_points
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None, channels=None):
        chans = [spatial_channel(X, self.theta_s)]
        if channels:
            chans.extend(channels)
        self.graph_ = build_graph(X, chans, radius=self.radius, w_floor=self.w_floor)
        self.labels_ = recursive_ncut(
            self.graph_, self.eig_threshold, min_share=self.min_share,
            min_points=self.min_points, sweep_points=self.sweep_points,
            tol=self.tol, max_iter=self.max_iter, seed=self.seed)
        self.n_instances_ = int(self.labels_.max()) if self.labels_.size else 0
        return self

    def fit_predict(self, X, y=None, channels=None) -> np.ndarray:
        return self.fit(X, channels=channels).labels_
