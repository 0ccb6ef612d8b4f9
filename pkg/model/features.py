"""From backbone pathway features and actor boxes to attention-ready token sets."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from core.errors import ConfigurationError, InvalidBoxError, ShapeError
from core.tensor import Tensor, concatenate, reduce_mean, reshape
from model.blocks import linear
from model.params import ACTOR_GRID, LinearParams

logger = logging.getLogger(__name__)


@dataclass
class PathwayFeatures:
    slow: Tensor  # [T_s, H, W, C_s]
    fast: Tensor  # [T_f, H, W, C_f]

    def __post_init__(self):
        if self.slow.ndim != 4 or self.fast.ndim != 4:
            raise ShapeError(f"pathway features must be rank 4, got {self.slow.shape} and {self.fast.shape}")
        if min(self.slow.shape) < 1 or min(self.fast.shape) < 1:
            raise ShapeError(f"pathway extents must be positive, got {self.slow.shape} and {self.fast.shape}")
        if self.slow.shape[1:3] != self.fast.shape[1:3]:
            raise ShapeError(f"slow grid {self.slow.shape[1:3]} differs from fast grid {self.fast.shape[1:3]}")
        if self.fast.shape[0] <= self.slow.shape[0]:
            raise ShapeError(f"fast pathway needs more frames than slow, got T_f={self.fast.shape[0]}, T_s={self.slow.shape[0]}")

    @property
    def grid(self):
        return self.slow.shape[1], self.slow.shape[2]

    @property
    def channels(self) -> int:
        return self.slow.shape[3] + self.fast.shape[3]


@dataclass(frozen=True)
class ActorBox:
    """Box in normalised image coordinates, taken on the clip's center frame."""

    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float = 1.0
    is_ground_truth: bool = False

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(c) and 0.0 <= c <= 1.0 for c in coords):
            raise InvalidBoxError(f"box coordinates must lie in [0, 1], got {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidBoxError(f"box corners out of order: {coords}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidBoxError(f"box confidence must lie in [0, 1], got {self.confidence}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass
class ActorFeature:
    grid: Tensor  # [7, 7, C]
    tokens: Tensor  # [49, C]

    @classmethod
    def from_grid(cls, grid: Tensor) -> "ActorFeature":
        rows, cols, channels = grid.shape
        return cls(grid=grid, tokens=reshape(grid, (rows * cols, channels)))


@dataclass
class ContextMaps:
    pooled_concat: Tensor  # [H, W, C]
    slow_tokens: Tensor  # [H*W, C_s] or projected [H*W, d]
    fast_tokens: Tensor  # [T_f, C_f] or projected [T_f, d]

    @property
    def pooled_tokens(self) -> Tensor:
        h, w, c = self.pooled_concat.shape
        return reshape(self.pooled_concat, (h * w, c))


def temporal_pool(f: Tensor) -> Tensor:
    """Mean over time, [T, H, W, C] -> [H, W, C]."""
    return reduce_mean(f, axis=0)


def spatial_pool(f: Tensor) -> Tensor:
    """Mean over both spatial axes, [T, H, W, C] -> [T, C]."""
    return reduce_mean(reduce_mean(f, axis=1), axis=1)


def _project(tokens: Tensor, projection: Optional[LinearParams], pathway: str) -> Tensor:
    if projection is None:
        return tokens
    if projection.in_features != tokens.shape[-1]:
        raise ConfigurationError(
            f"{pathway} projection expects {projection.in_features} channels, features carry {tokens.shape[-1]}"
        )
    return linear(tokens, projection)


def build_context_maps(
    pf: PathwayFeatures,
    slow_projection: Optional[LinearParams] = None,
    fast_projection: Optional[LinearParams] = None,
) -> ContextMaps:
    slow_pooled = temporal_pool(pf.slow)
    h, w, c_s = slow_pooled.shape
    pooled_concat = concatenate([slow_pooled, temporal_pool(pf.fast)], axis=-1)
    slow_tokens = _project(reshape(slow_pooled, (h * w, c_s)), slow_projection, "slow")
    fast_tokens = _project(spatial_pool(pf.fast), fast_projection, "fast")
    return ContextMaps(pooled_concat=pooled_concat, slow_tokens=slow_tokens, fast_tokens=fast_tokens)


def box_to_grid(box: ActorBox, height: int, width: int):
    """Continuous feature-grid coordinates (x1, y1, x2, y2) of a normalised box.

    A one-cell axis maps every box onto coordinate 0; sampling then reads
    that single cell.
    """
    return box.x1 * (width - 1), box.y1 * (height - 1), box.x2 * (width - 1), box.y2 * (height - 1)


def _interpolation_axis(coords: np.ndarray, extent: int):
    coords = np.clip(coords, 0.0, extent - 1)
    low = np.clip(np.floor(coords), 0, max(extent - 2, 0)).astype(np.intp)
    high = np.minimum(low + 1, extent - 1)
    frac = coords - low
    return low, high, frac


def bilinear_sample(fmap: Tensor, ys: np.ndarray, xs: np.ndarray) -> Tensor:
    """Sample `fmap` [H, W, C] on the grid ys x xs, clamping to the border."""
    height, width, _ = fmap.shape
    y0, y1, fy = _interpolation_axis(np.asarray(ys, dtype=float), height)
    x0, x1, fx = _interpolation_axis(np.asarray(xs, dtype=float), width)
    wy, wx = fy[:, None, None], fx[None, :, None]
    top = fmap[y0[:, None], x0[None, :]] * ((1.0 - wy) * (1.0 - wx)) + fmap[y0[:, None], x1[None, :]] * ((1.0 - wy) * wx)
    bottom = fmap[y1[:, None], x0[None, :]] * (wy * (1.0 - wx)) + fmap[y1[:, None], x1[None, :]] * (wy * wx)
    return top + bottom


def roi_align(fmap: Tensor, box: ActorBox, out_size: int = ACTOR_GRID) -> Tensor:
    """One bilinear sample at the center of each of the out_size x out_size bins."""
    height, width, _ = fmap.shape
    x1, y1, x2, y2 = box_to_grid(box, height, width)
    if (width > 1 and x2 - x1 <= 0.0) or (height > 1 and y2 - y1 <= 0.0):
        raise InvalidBoxError(f"box {box} has zero area on a {height}x{width} feature grid")
    centers = (np.arange(out_size) + 0.5) / out_size
    ys = y1 + centers * (y2 - y1)
    xs = x1 + centers * (x2 - x1)
    return bilinear_sample(fmap, ys, xs)


def extract_actor_features(pf: PathwayFeatures, boxes: Sequence[ActorBox]) -> List[ActorFeature]:
    if not boxes:
        return []
    pooled = build_context_maps(pf).pooled_concat
    return [ActorFeature.from_grid(roi_align(pooled, box)) for box in boxes]


def filter_proposals(boxes: Sequence[ActorBox], threshold: float, keep_ground_truth: bool = True) -> List[ActorBox]:
    """Keep boxes scored above `threshold`; ground-truth boxes always survive when training."""
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"proposal threshold must lie in [0, 1], got {threshold}")
    kept = [b for b in boxes if b.confidence > threshold or (keep_ground_truth and b.is_ground_truth)]
    logger.debug(f"kept {len(kept)}/{len(boxes)} proposals above {threshold}")
    return kept
