"""Mini-batch SGD training of the context head on cached clip features."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import DatasetError, TrainingDivergenceError
from model.head import bce_loss, head_logits
from model.optimizer import SGD
from model.params import HeadParams, init_params, mark_trainable
from runner.config_loader import RunConfig
from runner.evaluation_runner import evaluate_params
from runner.feature_cache import ClipFeatures, FeatureCache, stack_features
from simulators.clip_simulator import DIRECTION_CLASSES, SyntheticClip

LOG_COLUMNS = ["step", "loss", "val_map", "val_direction_map"]


@dataclass
class TrainingResult:
    params: HeadParams
    velocities: Dict[str, np.ndarray]
    steps: int
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def log(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns=LOG_COLUMNS)

    @property
    def initial_loss(self) -> Optional[float]:
        return self.history[0]["loss"] if self.history else None

    @property
    def final_loss(self) -> Optional[float]:
        return self.history[-1]["loss"] if self.history else None


def batch_schedule(num_clips: int, batch_size: int, steps: int, seed: int) -> List[np.ndarray]:
    """Clip indices per step: reshuffled epochs, batches never straddle an epoch."""
    rng = np.random.default_rng(seed)
    size = min(batch_size, num_clips)
    schedule: List[np.ndarray] = []
    order = np.empty(0, dtype=np.int64)
    while len(schedule) < steps:
        if order.size < size:
            order = rng.permutation(num_clips)
        schedule.append(order[:size])
        order = order[size:]
    return schedule


def training_loss(params: HeadParams, items: Sequence[ClipFeatures]):
    batch = stack_features(items)
    logits = head_logits(batch.actor_tokens, batch.slow_tokens, batch.fast_tokens, params, batch.pooled_tokens)
    return bce_loss(logits, batch.labels)


class Trainer:
    """Owns one head, its optimizer and the training log of one run."""

    def __init__(
        self,
        config: RunConfig,
        cache: FeatureCache,
        variant: Optional[str] = None,
        seed: Optional[int] = None,
        params: Optional[HeadParams] = None,
        velocities: Optional[Dict[str, np.ndarray]] = None,
    ):
        self.config = config
        self.cache = cache
        self.seed = config.run.seed if seed is None else seed
        self.variant = variant or config.model.variant
        self.logger = logging.getLogger(f"trainer.{config.run.name}.{self.variant}.{self.seed}")
        self.params = mark_trainable(params or init_params(config.head_dims(self.variant), self.seed))
        opt = config.optimizer
        self.optimizer = SGD(opt.lr, opt.momentum, velocities)

    def fit(self, train: Sequence[SyntheticClip], val: Sequence[SyntheticClip] = ()) -> TrainingResult:
        opt, ev = self.config.optimizer, self.config.evaluation
        if opt.steps and not train:
            raise DatasetError("training needs at least one training clip")
        items = [self.cache.training(clip) for clip in train]
        history: List[Dict[str, float]] = []
        self.logger.info(f"training {self.variant} for {opt.steps} steps on {len(items)} clips")

        for step, indices in enumerate(batch_schedule(len(items), opt.batch_size, opt.steps, self.seed)):
            self.optimizer.zero_grad(self.params)
            loss = training_loss(self.params, [items[i] for i in indices])
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergenceError(f"non-finite loss {value} at step {step}")
            loss.backward()
            self.optimizer.step(self.params)

            row = {"step": step, "loss": value, "val_map": np.nan, "val_direction_map": np.nan}
            last = step == opt.steps - 1
            if val and (step % ev.eval_every == 0 or last):
                outcome = evaluate_params(self.params, val, self.cache, ev.iou_threshold, opt.batch_size)
                row["val_map"] = outcome.result.mean_ap
                row["val_direction_map"] = outcome.result.mean_ap_over(DIRECTION_CLASSES)
                self.logger.info(
                    f"step {step}: loss {value:.5f}, val mAP {100.0 * row['val_map']:.2f}, "
                    f"direction mAP {100.0 * row['val_direction_map']:.2f}"
                )
            elif step % ev.eval_every == 0 or last:
                self.logger.info(f"step {step}: loss {value:.5f}")
            history.append(row)

        self.optimizer.zero_grad(self.params)
        return TrainingResult(self.params, self.optimizer.velocities, self.optimizer.steps, history)
