"""Segmentation and detection metrics on integer class masks and boxes."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np


def _supports(pred: np.ndarray, gt: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    return pred == k, gt == k


def iou(pred: np.ndarray, gt: np.ndarray, k: int) -> float:
    """Intersection over union of the class-k supports.

    Both supports empty counts as a perfect score of 1.
    """
    a, b = _supports(pred, gt, k)
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(a, b).sum()) / union


def dice(pred: np.ndarray, gt: np.ndarray, k: int) -> float:
    """Dice score 2|A n B| / (|A| + |B|); empty vs empty is 1."""
    a, b = _supports(pred, gt, k)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2 * int(np.logical_and(a, b).sum()) / total


class PrecisionRecall(NamedTuple):
    precision: float
    recall: float
    degenerate: bool


def pixel_precision_recall(pred: np.ndarray, gt: np.ndarray, k: int) -> PrecisionRecall:
    """Per-class pixel precision TP/(TP+FP) and recall TP/(TP+FN).

    An empty denominator scores 1 and raises the degenerate flag.
    """
    a, b = _supports(pred, gt, k)
    tp = int(np.logical_and(a, b).sum())
    np_pred = int(a.sum())
    np_gt = int(b.sum())
    degenerate = np_pred == 0 or np_gt == 0
    pp = tp / np_pred if np_pred else 1.0
    pr = tp / np_gt if np_gt else 1.0
    return PrecisionRecall(pp, pr, degenerate)


def mean_aggregate(per_class: Sequence[float], kind: str = "arithmetic") -> float:
    """Arithmetic or harmonic mean of per-class scores; the harmonic mean
    of anything containing a non-positive value is 0."""
    vals = list(per_class)
    if not vals:
        raise ValueError("cannot aggregate an empty score list")
    if kind == "arithmetic":
        return float(np.mean(vals))
    if kind == "harmonic":
        if min(vals) <= 0.0:
            return 0.0
        return len(vals) / float(np.sum(1.0 / np.asarray(vals, dtype=np.float64)))
    raise ValueError(f"kind must be 'arithmetic' or 'harmonic', got {kind!r}")


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    """IoU of two axis-aligned boxes (min_r, min_c, max_r, max_c)."""
    inter_r = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    inter_c = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = inter_r * inter_c
    area_a = max(0.0, a[2] - a[0]) * max(0.0, a[3] - a[1])
    area_b = max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


class ApAr(NamedTuple):
    ap: float
    ar: float


def detection_ap_ar(pred_boxes: Sequence[Sequence[float]],
                    gt_boxes: Sequence[Sequence[float]],
                    iou_threshold: float = 0.5,
                    scores: Sequence[float] | None = None) -> ApAr:
    """Single-threshold detection precision and recall.

    Predictions are greedily matched in descending score order (input
    order when scores are omitted); a prediction is a true positive when
    it overlaps a still-unmatched ground-truth box with IoU at or above
    the threshold. AP = TP/(TP+FP), AR = TP/(TP+FN); an empty side leaves
    its ratio at 1.
    """
    n_pred = len(pred_boxes)
    if scores is None:
        order = list(range(n_pred))
    else:
        if len(scores) != n_pred:
            raise ValueError("scores length must match pred_boxes")
        order = sorted(range(n_pred), key=lambda i: -scores[i])
    matched = [False] * len(gt_boxes)
    tp = 0
    for i in order:
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(gt_boxes):
            if matched[j]:
                continue
            v = box_iou(pred_boxes[i], gt)
            if v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0 and best_iou >= iou_threshold:
            matched[best_j] = True
            tp += 1
    ap = tp / n_pred if n_pred else 1.0
    ar = tp / len(gt_boxes) if gt_boxes else 1.0
    return ApAr(ap, ar)


def class_weights(gt_corpus: Sequence[np.ndarray], num_classes: int) -> np.ndarray:
    """Normalized per-class weights inversely proportional to the class
    frequency over a mask corpus. Every class must occur at least once."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for mask in gt_corpus:
        arr = np.asarray(mask)
        counts += np.bincount(arr.ravel().astype(np.int64), minlength=num_classes)[:num_classes]
    for k in range(num_classes):
        if counts[k] == 0:
            raise ValueError(f"class {k} never occurs in the corpus")
    inv = 1.0 / counts
    return inv / inv.sum()
