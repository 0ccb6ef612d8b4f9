"""Per-clip head inputs computed once through the frozen backbone stub."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.tensor import Tensor
from model.features import ActorBox, build_context_maps, extract_actor_features, filter_proposals
from model.params import ACTOR_GRID
from simulators.backbone_simulator import BackboneStubParams, backbone_stub
from simulators.clip_simulator import SyntheticClip

logger = logging.getLogger(__name__)


@dataclass
class ClipFeatures:
    clip_id: str
    boxes: List[ActorBox]
    actor_tokens: np.ndarray  # [N, 49, C]
    slow_tokens: np.ndarray  # [H*W, C_s]
    fast_tokens: np.ndarray  # [T_f, C_f]
    pooled_tokens: np.ndarray  # [H*W, C]
    labels: Optional[np.ndarray] = None  # [N, num_classes] for ground-truth boxes

    @property
    def num_actors(self) -> int:
        return len(self.boxes)


@dataclass
class FeatureBatch:
    clip_ids: List[str]
    actor_tokens: Tensor  # [B, N, 49, C]
    slow_tokens: Tensor  # [B, H*W, C_s]
    fast_tokens: Tensor  # [B, T_f, C_f]
    pooled_tokens: Tensor  # [B, H*W, C]
    labels: Optional[np.ndarray] = None  # [B, N, num_classes]


def stack_features(items: Sequence[ClipFeatures]) -> FeatureBatch:
    """Stack clips that share an actor count along a new leading axis."""
    counts = {f.num_actors for f in items}
    if len(counts) != 1:
        raise ValueError(f"cannot stack clips with different actor counts {sorted(counts)}")
    labels = None
    if all(f.labels is not None for f in items):
        labels = np.stack([f.labels for f in items])
    return FeatureBatch(
        clip_ids=[f.clip_id for f in items],
        actor_tokens=Tensor(np.stack([f.actor_tokens for f in items])),
        slow_tokens=Tensor(np.stack([f.slow_tokens for f in items])),
        fast_tokens=Tensor(np.stack([f.fast_tokens for f in items])),
        pooled_tokens=Tensor(np.stack([f.pooled_tokens for f in items])),
        labels=labels,
    )


def group_by_actor_count(items: Sequence[ClipFeatures]) -> List[List[ClipFeatures]]:
    """Groups in order of first appearance; clips keep their relative order."""
    groups: Dict[int, List[ClipFeatures]] = defaultdict(list)
    for f in items:
        if f.num_actors:
            groups[f.num_actors].append(f)
    return list(groups.values())


class FeatureCache:
    """Actor tokens and raw context tokens keyed by (clip, box source)."""

    def __init__(self, backbone: BackboneStubParams, proposal_threshold: float = 0.8):
        self.backbone = backbone
        self.proposal_threshold = proposal_threshold
        self._entries: Dict[Tuple[str, str], ClipFeatures] = {}
        self.logger = logging.getLogger("feature_cache")

    def __len__(self) -> int:
        return len(self._entries)

    def _compute(self, clip: SyntheticClip, boxes: List[ActorBox], labels: Optional[np.ndarray]) -> ClipFeatures:
        pf = backbone_stub(clip, self.backbone)
        maps = build_context_maps(pf)
        actors = extract_actor_features(pf, boxes)
        channels = pf.channels
        actor_tokens = np.stack([a.tokens.data for a in actors]) if actors else np.zeros((0, ACTOR_GRID * ACTOR_GRID, channels))
        return ClipFeatures(
            clip_id=clip.clip_id,
            boxes=list(boxes),
            actor_tokens=actor_tokens,
            slow_tokens=maps.slow_tokens.data,
            fast_tokens=maps.fast_tokens.data,
            pooled_tokens=maps.pooled_tokens.data,
            labels=labels,
        )

    def training(self, clip: SyntheticClip) -> ClipFeatures:
        """Ground-truth actor boxes with their labels."""
        key = (clip.clip_id, "gt")
        if key not in self._entries:
            self._entries[key] = self._compute(clip, clip.boxes, clip.labels)
        return self._entries[key]

    def inference(self, clip: SyntheticClip) -> ClipFeatures:
        """Detector proposals above the confidence threshold."""
        key = (clip.clip_id, "proposals")
        if key not in self._entries:
            boxes = filter_proposals(clip.proposals, self.proposal_threshold, keep_ground_truth=False)
            if not boxes:
                self.logger.info(f"{clip.clip_id}: no proposal above {self.proposal_threshold}")
            self._entries[key] = self._compute(clip, boxes, None)
        return self._entries[key]
