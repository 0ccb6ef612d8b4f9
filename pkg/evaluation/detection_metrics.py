"""Frame-level detection evaluation: IoU, greedy matching, per-class AP and mAP."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.errors import EvaluationError
from model.features import ActorBox

logger = logging.getLogger(__name__)

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectionRecord:
    clip_id: str
    box: ActorBox
    class_id: int
    score: float


@dataclass(frozen=True)
class GroundTruthRecord:
    clip_id: str
    box: ActorBox
    class_id: int


@dataclass
class EvalResult:
    per_class_ap: Dict[int, Optional[float]]  # None for classes without ground truth
    mean_ap: float
    counts: Dict[int, int]
    class_names: List[str] = field(default_factory=list)

    def class_name(self, class_id: int) -> str:
        return self.class_names[class_id] if class_id < len(self.class_names) else f"class_{class_id}"

    def mean_ap_over(self, class_ids: Sequence[int]) -> float:
        """Mean AP restricted to `class_ids` (classes without ground truth skipped)."""
        values = [self.per_class_ap[c] for c in class_ids if self.per_class_ap.get(c) is not None]
        if not values:
            raise EvaluationError(f"none of classes {list(class_ids)} has ground truth")
        return float(np.mean(values))

    def to_report(self) -> str:
        lines = ["class_id,class,count,ap"]
        for class_id in sorted(self.per_class_ap):
            ap = self.per_class_ap[class_id]
            shown = "n/a" if ap is None else f"{ap:.4f}"
            lines.append(f"{class_id},{self.class_name(class_id)},{self.counts.get(class_id, 0)},{shown}")
        lines.append(f"mAP,{100.0 * self.mean_ap:.2f}")
        return "\n".join(lines) + "\n"


def iou(a: ActorBox, b: ActorBox) -> float:
    inter_w = min(a.x2, b.x2) - max(a.x1, b.x1)
    inter_h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if inter_w <= 0.0 or inter_h <= 0.0:
        return 0.0
    intersection = inter_w * inter_h
    return intersection / (a.area + b.area - intersection)


def sort_detections(dets: Sequence[DetectionRecord]) -> List[DetectionRecord]:
    """Descending score; ties keep input order."""
    return sorted(dets, key=lambda d: -d.score)


def match_detections(
    dets: Sequence[DetectionRecord], gts: Sequence[GroundTruthRecord], iou_thresh: float = IOU_THRESHOLD
) -> np.ndarray:
    """True-positive flag per detection under greedy matching in the given order.

    Each detection takes the highest-IoU ground truth of its clip that is
    still unmatched, provided the overlap reaches the threshold.
    """
    by_clip: Dict[str, List[int]] = defaultdict(list)
    for i, gt in enumerate(gts):
        by_clip[gt.clip_id].append(i)
    matched = np.zeros(len(gts), dtype=bool)
    tp = np.zeros(len(dets), dtype=bool)
    for d, det in enumerate(dets):
        best, best_iou = -1, iou_thresh
        for g in by_clip.get(det.clip_id, []):
            if matched[g]:
                continue
            overlap = iou(det.box, gts[g].box)
            if overlap >= best_iou and (best < 0 or overlap > best_iou):
                best, best_iou = g, overlap
        if best >= 0:
            matched[best] = True
            tp[d] = True
    return tp


def precision_envelope_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-point interpolated area under the precision-recall curve."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def average_precision(
    dets: Sequence[DetectionRecord], gts: Sequence[GroundTruthRecord], iou_thresh: float = IOU_THRESHOLD
) -> Optional[float]:
    """AP for one class; `dets` must already be sorted. None when there is no ground truth."""
    if not gts:
        return None
    if not dets:
        return 0.0
    tp = match_detections(dets, gts, iou_thresh).astype(float)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / len(gts)
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(np.float64).eps)
    return precision_envelope_ap(recall, precision)


def mean_ap(
    per_class_ap: Dict[int, Optional[float]], counts: Dict[int, int], class_names: Sequence[str] = ()
) -> EvalResult:
    eligible = [ap for c, ap in per_class_ap.items() if ap is not None and counts.get(c, 0) > 0]
    if not eligible:
        raise EvaluationError("no class has ground truth; mean AP is undefined")
    return EvalResult(
        per_class_ap=dict(per_class_ap),
        mean_ap=float(np.mean(eligible)),
        counts=dict(counts),
        class_names=list(class_names),
    )


def evaluate_detections(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthRecord],
    num_classes: int,
    iou_thresh: float = IOU_THRESHOLD,
    class_names: Sequence[str] = (),
) -> EvalResult:
    dets_by_class: Dict[int, List[DetectionRecord]] = defaultdict(list)
    gts_by_class: Dict[int, List[GroundTruthRecord]] = defaultdict(list)
    for det in dets:
        dets_by_class[det.class_id].append(det)
    for gt in gts:
        gts_by_class[gt.class_id].append(gt)

    per_class: Dict[int, Optional[float]] = {}
    counts: Dict[int, int] = {}
    for class_id in range(num_classes):
        counts[class_id] = len(gts_by_class[class_id])
        per_class[class_id] = average_precision(
            sort_detections(dets_by_class[class_id]), gts_by_class[class_id], iou_thresh
        )
        if per_class[class_id] is None:
            logger.info(f"class {class_id} has no ground truth; excluded from mAP")
    return mean_ap(per_class, counts, class_names)
