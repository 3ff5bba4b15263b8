"""Detector metrics: IoU, greedy matching, 101-point AP, mAP and confusion matrix."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from .geometry import PixelBox

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
RECALL_GRID = np.arange(101) / 100.0


class EvaluationError(ValueError):
    pass


class NoGroundTruth(EvaluationError):
    pass


class EmptyGroundTruth(EvaluationError):
    pass


@dataclass(frozen=True)
class Detection:
    box: PixelBox
    class_id: int
    confidence: float
    image_id: Hashable

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence!r}")


@dataclass(frozen=True)
class GroundTruth:
    box: PixelBox
    class_id: int
    image_id: Hashable


def iou(a: PixelBox, b: PixelBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Match:
    detection: Detection
    ground_truth: Optional[GroundTruth]
    iou: float = 0.0

    @property
    def is_tp(self) -> bool:
        return self.ground_truth is not None


def _image_key(image_id) -> tuple[str, str]:
    return (type(image_id).__name__, str(image_id))


def _det_order(dets: Sequence[Detection]) -> list[int]:
    # descending confidence; ties by image id, then input order
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, _image_key(dets[i].image_id), i))


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thresh: float,
                     class_aware: bool = True) -> list[Match]:
    """Greedy one-to-one matching, highest confidence first.

    Each detection takes the still-unmatched ground truth of the same image
    (and class, unless ``class_aware`` is False) with the highest IoU, provided
    it reaches ``iou_thresh``. Output follows the confidence ordering.
    """
    by_image: dict = {}
    for g_idx, g in enumerate(gts):
        by_image.setdefault(g.image_id, []).append(g_idx)
    taken: set[int] = set()
    out = []
    for i in _det_order(dets):
        d = dets[i]
        best, best_iou = None, -1.0
        for g_idx in by_image.get(d.image_id, ()):
            g = gts[g_idx]
            if g_idx in taken or (class_aware and g.class_id != d.class_id):
                continue
            v = iou(d.box, g.box)
            if v >= iou_thresh and v > best_iou:
                best, best_iou = g_idx, v
        if best is None:
            out.append(Match(d, None, 0.0))
        else:
            taken.add(best)
            out.append(Match(d, gts[best], best_iou))
    return out


def precision_recall_curve(dets: Sequence[Detection], gts: Sequence[GroundTruth], class_id: int,
                           iou_thresh: float) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (recall, precision) points for one class, in confidence order."""
    cls_gts = [g for g in gts if g.class_id == class_id]
    if not cls_gts:
        raise NoGroundTruth(f"class {class_id} has no ground truth")
    cls_dets = [d for d in dets if d.class_id == class_id]
    tp = np.array([m.is_tp for m in match_detections(cls_dets, cls_gts, iou_thresh)], dtype=float)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = ctp / len(cls_gts)
    precision = ctp / np.maximum(ctp + cfp, np.finfo(float).tiny)
    return recall, precision


def interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """101-point interpolated average precision."""
    if len(recall) == 0:
        return 0.0
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    sampled = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(sampled.mean())


def average_precision(dets: Sequence[Detection], gts: Sequence[GroundTruth], class_id: int,
                      iou_thresh: float) -> float:
    return interpolated_ap(*precision_recall_curve(dets, gts, class_id, iou_thresh))


@dataclass(frozen=True)
class EvalReport:
    per_class_ap50: dict[int, float]
    per_class_ap50_95: dict[int, float]
    map50: float
    map50_95: float
    precision: float
    recall: float
    confusion: np.ndarray
    num_classes: int
    tp: int
    fp: int
    fn: int

    def normalized_confusion(self) -> np.ndarray:
        """Row-normalized confusion (rows: true class, background last)."""
        sums = self.confusion.sum(axis=1, keepdims=True)
        return np.divide(self.confusion, sums, out=np.zeros_like(self.confusion, dtype=float),
                         where=sums > 0)


def confusion_matrix(dets: Sequence[Detection], gts: Sequence[GroundTruth], num_classes: int,
                     iou_thresh: float = 0.5) -> np.ndarray:
    """Counts with rows = true class and columns = predicted class; index
    ``num_classes`` is the background. Matching ignores class so that class
    confusions show up off the diagonal."""
    cm = np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64)
    bg = num_classes
    matched = set()
    for m in match_detections(dets, gts, iou_thresh, class_aware=False):
        if m.ground_truth is None:
            cm[bg, m.detection.class_id] += 1
        else:
            matched.add(id(m.ground_truth))
            cm[m.ground_truth.class_id, m.detection.class_id] += 1
    for g in gts:
        if id(g) not in matched:
            cm[g.class_id, bg] += 1
    return cm


def map_suite(dets: Sequence[Detection], gts: Sequence[GroundTruth], conf_thresh: float = 0.25,
              num_classes: Optional[int] = None, iou_thresh: float = 0.5) -> EvalReport:
    """Full metric suite.

    mAP uses every detection; the scalar precision/recall and the confusion
    matrix use detections with confidence >= ``conf_thresh`` at IoU ``iou_thresh``.
    Classes without ground truth are left out of the mAP means.
    """
    if not gts:
        raise EmptyGroundTruth("evaluation needs at least one ground-truth box")
    classes = sorted({g.class_id for g in gts})
    if num_classes is None:
        num_classes = 1 + max([g.class_id for g in gts] + [d.class_id for d in dets])

    ap = {t: {c: average_precision(dets, gts, c, t) for c in classes} for t in IOU_THRESHOLDS}
    per50 = ap[0.5]
    per5095 = {c: float(np.mean([ap[t][c] for t in IOU_THRESHOLDS])) for c in classes}
    map50 = float(np.mean(list(per50.values())))
    map5095 = float(np.mean([np.mean(list(ap[t].values())) for t in IOU_THRESHOLDS]))

    kept = [d for d in dets if d.confidence >= conf_thresh]
    tp = sum(m.is_tp for m in match_detections(kept, gts, iou_thresh))
    fp = len(kept) - tp
    fn = len(gts) - tp
    return EvalReport(
        per_class_ap50=per50,
        per_class_ap50_95=per5095,
        map50=map50,
        map50_95=map5095,
        precision=tp / (tp + fp) if kept else 0.0,
        recall=tp / (tp + fn),
        confusion=confusion_matrix(kept, gts, num_classes, iou_thresh),
        num_classes=num_classes,
        tp=tp, fp=fp, fn=fn,
    )
