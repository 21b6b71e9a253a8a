"""Instance segmentation metrics over point-level labelings.

Ground truth id 0 marks ignore points: they are excluded from the point
universe entirely, so predictions overlapping only ignore points never
count against precision. Prediction id 0 means "no instance".

All metrics run on the contingency table built by match_matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DataError
from .graph import ProxyGraph
from .validation import check_labels

IOU_MATCH = 0.5
AP_GLOBAL_THRESHOLDS = tuple(np.arange(0.50, 0.96, 0.05).round(2))


@dataclass
class MatchMatrix:
    """Contingency table between predicted and ground truth instances."""

    pred_ids: np.ndarray  # ascending instance ids, 0 excluded
    gt_ids: np.ndarray
    intersections: np.ndarray  # (n_pred, n_gt) point counts
    pred_sizes: np.ndarray
    gt_sizes: np.ndarray

    @property
    def n_pred(self) -> int:
        return len(self.pred_ids)

    @property
    def n_gt(self) -> int:
        return len(self.gt_ids)

    def iou(self) -> np.ndarray:
        """Pairwise IoU matrix (n_pred, n_gt)."""
        inter = self.intersections.astype(np.float64)
        union = self.pred_sizes[:, None] + self.gt_sizes[None, :] - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            iou = np.where(union > 0, inter / union, 0.0)
        return iou


def match_matrix(pred_labels, gt_labels) -> MatchMatrix:
    """Build the contingency table on the non-ignore point universe."""
    pred = check_labels(pred_labels, name="pred_labels")
    gt = check_labels(gt_labels, n=pred.shape[0], name="gt_labels")
    keep = gt > 0
    pred = pred[keep]
    gt = gt[keep]
    pred_ids = np.unique(pred[pred > 0])
    gt_ids = np.unique(gt)
    pred_index = {int(p): i for i, p in enumerate(pred_ids)}
    gt_index = {int(g): i for i, g in enumerate(gt_ids)}
    inter = np.zeros((len(pred_ids), len(gt_ids)), dtype=np.int64)
    mask = pred > 0
    if mask.any():
        pi = np.array([pred_index[int(p)] for p in pred[mask]])
        gi = np.array([gt_index[int(g)] for g in gt[mask]])
        np.add.at(inter, (pi, gi), 1)
    pred_sizes = np.array([int((pred == p).sum()) for p in pred_ids], dtype=np.int64)
    gt_sizes = np.array([int((gt == g).sum()) for g in gt_ids], dtype=np.int64)
    return MatchMatrix(pred_ids, gt_ids, inter, pred_sizes, gt_sizes)


def precision_recall_f1(matrix: MatchMatrix, iou_threshold: float = IOU_MATCH) -> tuple[float, float, float]:
    """Greedy one-to-one matching by descending IoU.

    IoU ties resolve by ascending (pred id, gt id). A matched pair counts
    as a true positive when its IoU reaches the threshold.
    """
    iou = matrix.iou()
    pairs = [
        (float(iou[i, j]), int(matrix.pred_ids[i]), int(matrix.gt_ids[j]), i, j)
        for i in range(matrix.n_pred)
        for j in range(matrix.n_gt)
        if iou[i, j] > 0
    ]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_pred = set()
    used_gt = set()
    tp = 0
    for value, _, _, i, j in pairs:
        if i in used_pred or j in used_gt:
            continue
        if value >= iou_threshold:
            used_pred.add(i)
            used_gt.add(j)
            tp += 1
    precision = tp / matrix.n_pred if matrix.n_pred else 0.0
    recall = tp / matrix.n_gt if matrix.n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def average_precision(matrix: MatchMatrix, confidences: dict[int, float] | None,
                      iou_threshold: float = IOU_MATCH) -> float:
    """All-point interpolated average precision.

    Predictions are ranked by descending confidence (missing confidences
    default to 0.5), ties by ascending pred id. Each prediction greedily
    takes the unmatched ground truth instance with the highest IoU. With
    no ground truth instances the value is defined as 0.
    """
    if matrix.n_gt == 0:
        return 0.0
    if matrix.n_pred == 0:
        return 0.0
    confidences = confidences or {}
    conf = np.array([float(confidences.get(int(p), 0.5)) for p in matrix.pred_ids])
    order = np.lexsort((matrix.pred_ids, -conf))
    iou = matrix.iou()
    matched_gt = np.zeros(matrix.n_gt, dtype=bool)
    tp_flags = np.zeros(matrix.n_pred, dtype=bool)
    for rank, i in enumerate(order):
        row = iou[i].copy()
        row[matched_gt] = -1.0
        j = int(np.argmax(row))
        if row[j] >= iou_threshold:
            matched_gt[j] = True
            tp_flags[rank] = True
    tp_cum = np.cumsum(tp_flags)
    ranks = np.arange(1, matrix.n_pred + 1)
    precision = tp_cum / ranks
    recall = tp_cum / matrix.n_gt
    # all-point interpolation: running max of precision from the right
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for k in range(matrix.n_pred):
        if tp_flags[k]:
            ap += (recall[k] - prev_recall) * interp[k]
            prev_recall = recall[k]
    return float(ap)


def ap_global(matrix: MatchMatrix, confidences: dict[int, float] | None) -> float:
    """Mean AP over IoU thresholds 0.50 to 0.95 in steps of 0.05."""
    return float(np.mean([average_precision(matrix, confidences, t) for t in AP_GLOBAL_THRESHOLDS]))


def s_assoc(pred_labels, gt_labels) -> float:
    """Association score between a predicted and ground truth labeling.

    For each ground truth instance t, overlapping predictions s contribute
    |s n t| * IoU(s, t), normalized by |t|; the result averages over all
    ground truth instances. Ignore points (gt 0) are excluded.
    """
    matrix = match_matrix(pred_labels, gt_labels)
    if matrix.n_gt == 0:
        return 0.0
    iou = matrix.iou()
    total = 0.0
    for j in range(matrix.n_gt):
        inner = 0.0
        for i in range(matrix.n_pred):
            if matrix.intersections[i, j] > 0:
                inner += matrix.intersections[i, j] * iou[i, j]
        total += inner / matrix.gt_sizes[j]
    return float(total / matrix.n_gt)


def proposal_confidence(graph: ProxyGraph, labels) -> dict[int, float]:
    """Mean intra-instance edge weight per instance.

    Instances without any internal edge (singletons included) score 0.5.
    """
    labels = check_labels(labels, n=graph.n, name="labels")
    coo = graph.matrix.tocoo()
    upper = coo.row < coo.col
    rows, cols, data = coo.row[upper], coo.col[upper], coo.data[upper]
    same = labels[rows] == labels[cols]
    out: dict[int, float] = {}
    for inst in np.unique(labels[labels > 0]):
        sel = same & (labels[rows] == inst)
        if sel.any():
            out[int(inst)] = float(data[sel].mean())
        else:
            out[int(inst)] = 0.5
    return out


@dataclass
class EvalReport:
    """Flat summary of instance segmentation quality."""

    precision: float
    recall: float
    f1: float
    ap25: float
    ap50: float
    ap: float  # mean over thresholds 0.50:0.05:0.95
    s_assoc: float
    n_pred: int
    n_gt: int
    n_points: int
    gt_empty: bool = False
    notes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(pred_labels, gt_labels, confidences: dict[int, float] | None = None) -> EvalReport:
    """Compute the full metric suite for one labeling pair."""
    pred = check_labels(pred_labels, name="pred_labels")
    gt = check_labels(gt_labels, n=pred.shape[0], name="gt_labels")
    matrix = match_matrix(pred, gt)
    if matrix.n_gt == 0:
        return EvalReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                          matrix.n_pred, 0, int((gt > 0).sum()), gt_empty=True)
    precision, recall, f1 = precision_recall_f1(matrix, IOU_MATCH)
    report = EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        ap25=average_precision(matrix, confidences, 0.25),
        ap50=average_precision(matrix, confidences, 0.50),
        ap=ap_global(matrix, confidences),
        s_assoc=s_assoc(pred, gt),
        n_pred=matrix.n_pred,
        n_gt=matrix.n_gt,
        n_points=int((gt > 0).sum()),
    )
    return report
