"""Scores validation clips with a trained head and evaluates the detections."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.tensor import Tensor
from evaluation.detection_metrics import DetectionRecord, EvalResult, GroundTruthRecord, evaluate_detections
from evaluation.record_io import write_detections
from model.head import head_forward, time_reversal_sensitivity
from model.params import HeadParams
from runner.config_loader import RunConfig
from runner.dataset_store import ground_truth_records
from runner.feature_cache import ClipFeatures, FeatureCache, group_by_actor_count, stack_features
from simulators.clip_simulator import CLASS_NAMES, DIRECTION_CLASSES, SyntheticClip


@dataclass
class EvaluationOutcome:
    result: EvalResult
    detections: List[DetectionRecord]
    ground_truth: List[GroundTruthRecord]

    @property
    def direction_map(self) -> float:
        return self.result.mean_ap_over(DIRECTION_CLASSES)


def predict(params: HeadParams, items: Sequence[ClipFeatures], batch_size: int = 8) -> Dict[str, np.ndarray]:
    """Per-clip score matrices [N, num_classes]; clips without actors map to an empty matrix."""
    scores = {f.clip_id: np.zeros((0, params.num_classes)) for f in items}
    for group in group_by_actor_count(items):
        for start in range(0, len(group), batch_size):
            batch = stack_features(group[start:start + batch_size])
            probs = head_forward(batch.actor_tokens, batch.slow_tokens, batch.fast_tokens, params,
                                 batch.pooled_tokens).data
            for clip_id, clip_scores in zip(batch.clip_ids, probs):
                scores[clip_id] = clip_scores
    return scores


def detections_from_scores(items: Sequence[ClipFeatures], scores: Dict[str, np.ndarray]) -> List[DetectionRecord]:
    """One record per (proposal, class), in clip then box then class order."""
    records = []
    for f in items:
        for box, box_scores in zip(f.boxes, scores[f.clip_id]):
            for class_id, score in enumerate(box_scores):
                records.append(DetectionRecord(f.clip_id, box, class_id, float(score)))
    return records


def evaluate_params(
    params: HeadParams,
    clips: Sequence[SyntheticClip],
    cache: FeatureCache,
    iou_threshold: float = 0.5,
    batch_size: int = 8,
) -> EvaluationOutcome:
    items = [cache.inference(clip) for clip in clips]
    detections = detections_from_scores(items, predict(params, items, batch_size))
    ground_truth = ground_truth_records(clips)
    result = evaluate_detections(detections, ground_truth, params.num_classes, iou_threshold, CLASS_NAMES)
    return EvaluationOutcome(result=result, detections=detections, ground_truth=ground_truth)


def temporal_sensitivity(params: HeadParams, clips: Sequence[SyntheticClip], cache: FeatureCache) -> float:
    """Mean absolute score change over clips when each clip's fast tokens are time-reversed."""
    values = []
    for clip in clips:
        f = cache.training(clip)
        values.append(time_reversal_sensitivity(
            Tensor(f.actor_tokens), Tensor(f.slow_tokens), Tensor(f.fast_tokens), params, Tensor(f.pooled_tokens)
        ))
    return float(np.mean(values)) if values else 0.0


class EvaluationRunner:
    """Runs cmd_eval: scores, detection file and report for one checkpoint."""

    def __init__(self, config: RunConfig, cache: FeatureCache):
        self.config = config
        self.cache = cache
        self.logger = logging.getLogger(f"evaluator.{config.run.name}")

    def run(self, params: HeadParams, clips: Sequence[SyntheticClip], report_dir: Optional[Path] = None) -> EvaluationOutcome:
        self.logger.info(f"evaluating {params.dims.variant} head on {len(clips)} clips")
        outcome = evaluate_params(
            params, clips, self.cache, self.config.evaluation.iou_threshold, self.config.optimizer.batch_size
        )
        self.logger.info(f"{len(outcome.detections)} detections, mAP {100.0 * outcome.result.mean_ap:.2f}")
        if report_dir is not None:
            report_dir = Path(report_dir)
            report_dir.mkdir(parents=True, exist_ok=True)
            write_detections(report_dir / "detections.txt", outcome.detections)
            (report_dir / "eval_report.txt").write_text(outcome.result.to_report(), encoding="utf-8")
            self.logger.info(f"report written to {report_dir / 'eval_report.txt'}")
        return outcome
