"""COCO-style average precision for polygon detections against mask truth.

Detections are scored as masks: polygons are rasterized at the ground-truth
image resolution so the polygon approximation penalty is measured exactly as
a mask benchmark would. Matching is greedy by descending score, one ground
truth per detection, and AP uses the 101-point interpolated precision-recall
curve. The headline numbers are AP (mean over IoU thresholds 0.50:0.05:0.95
and over classes with at least one ground truth) and AP50.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PolysegError
from .geometry import mask_iou, rasterize_polygon

IOU_THRESHOLDS = np.linspace(0.50, 0.95, 10)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass
class EvalGroundTruth:
    """One ground-truth instance of one image."""

    image_id: str
    class_id: int
    mask: np.ndarray = field(repr=False)


@dataclass
class EvalDetection:
    """One detection; give either a polygon (rasterized lazily) or a mask."""

    image_id: str
    class_id: int
    score: float
    polygon: Optional[np.ndarray] = field(default=None, repr=False)
    mask: Optional[np.ndarray] = field(default=None, repr=False)

    def resolve_mask(self, shape):
        if self.mask is not None:
            return self.mask
        if self.polygon is None:
            raise PolysegError("detection needs a polygon or a mask")
        return rasterize_polygon(self.polygon, shape[1], shape[0])


def match_at_iou(det_masks, gt_masks, iou_thr):
    """Greedy TP/FP assignment for one image and class.

    ``det_masks`` must be ordered by descending detection score. Each
    detection takes the unmatched ground truth of highest IoU when that IoU
    reaches the threshold; every ground truth matches at most once. Returns
    (tp flags, matched gt index or -1) per detection.
    """
    tp = np.zeros(len(det_masks), dtype=bool)
    matched_gt = np.full(len(det_masks), -1, dtype=np.int64)
    gt_taken = np.zeros(len(gt_masks), dtype=bool)
    for di, dm in enumerate(det_masks):
        best = -1
        best_iou = 0.0
        for gi, gm in enumerate(gt_masks):
            if gt_taken[gi]:
                continue
            iou = mask_iou(dm, gm)
            if iou >= iou_thr and iou > best_iou:
                best = gi
                best_iou = iou
        if best >= 0:
            tp[di] = True
            matched_gt[di] = best
            gt_taken[best] = True
    return tp, matched_gt


def _interpolated_ap(tp_sorted, npos):
    """101-point interpolated AP from score-ordered TP flags."""
    if npos == 0:
        return float("nan")
    if tp_sorted.size == 0:
        return 0.0
    cum_tp = np.cumsum(tp_sorted)
    cum_fp = np.cumsum(~tp_sorted)
    recall = cum_tp / npos
    precision = cum_tp / (cum_tp + cum_fp)
    # Monotone precision envelope, then sample at the fixed recall points.
    for i in range(precision.size - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < precision.size, precision[np.minimum(idx, precision.size - 1)], 0.0)
    return float(sampled.mean())


class _ClassEval:
    """Per-class matching state reused across IoU thresholds."""

    def __init__(self, dets, gts):
        self.npos = len(gts)
        order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
        self.order = order
        gt_by_image = defaultdict(list)
        for gi, gt in enumerate(gts):
            gt_by_image[gt.image_id].append(gi)
        self.gt_image_ids = gt_by_image
        # IoU rows: for each detection (score order) the IoUs against the
        # ground truths of its image, aligned with gt_by_image lists.
        self.iou_rows = []
        for di in order:
            det = dets[di]
            gis = gt_by_image.get(det.image_id, [])
            if not gis:
                self.iou_rows.append((det.image_id, np.empty(0)))
                continue
            shape = gts[gis[0]].mask.shape
            dm = det.resolve_mask(shape)
            ious = np.array([mask_iou(dm, gts[gi].mask) for gi in gis])
            self.iou_rows.append((det.image_id, ious))

    def ap(self, iou_thr):
        taken = {img: np.zeros(len(gis), dtype=bool) for img, gis in self.gt_image_ids.items()}
        tp = np.zeros(len(self.iou_rows), dtype=bool)
        for row, (img, ious) in enumerate(self.iou_rows):
            if ious.size == 0:
                continue
            free = ~taken[img]
            cand = np.where(free & (ious >= iou_thr), ious, -1.0)
            best = int(np.argmax(cand)) if cand.size else -1
            if best >= 0 and cand[best] > -1.0:
                tp[row] = True
                taken[img][best] = True
        return _interpolated_ap(tp, self.npos)


def average_precision(dets, gts, iou_thr):
    """AP of one class across images at a single IoU threshold.

    Returns NaN when the class has no ground truth at all.
    """
    return _ClassEval(dets, gts).ap(iou_thr)


def ap_suite(dets, gts, classes=None):
    """AP and AP50 over classes with ground truth.

    Returns a dict with overall "AP" / "AP50" (NaN when no class has any
    ground truth) and a per-class breakdown.
    """
    if classes is None:
        classes = sorted({g.class_id for g in gts})
    per_class = {}
    ap_values = []
    ap50_values = []
    for cls in classes:
        class_gts = [g for g in gts if g.class_id == cls]
        if not class_gts:
            continue
        class_dets = [d for d in dets if d.class_id == cls]
        ev = _ClassEval(class_dets, class_gts)
        aps = np.array([ev.ap(thr) for thr in IOU_THRESHOLDS])
        per_class[cls] = {"AP": float(aps.mean()), "AP50": float(aps[0])}
        ap_values.append(aps.mean())
        ap50_values.append(aps[0])
    if not per_class:
        return {"AP": float("nan"), "AP50": float("nan"), "per_class": {}}
    return {
        "AP": float(np.mean(ap_values)),
        "AP50": float(np.mean(ap50_values)),
        "per_class": per_class,
    }
