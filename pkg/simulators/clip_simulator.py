"""Synthetic give/receive clips for desk-scale action detection.

Two dim textured actors stand left (A) and right (B); a small bright object
travels between them. A give clip and its receive twin share a seed. For
t in 1..T-1 frame t of the receive clip is frame T - t of the give clip,
so the center frames are identical and any temporally pooled view of
center-aligned samples is identical too. Frame 0 is the exception: it
shows the object on its starting actor, which differs between the twins.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError
from core.tensor import Tensor
from model.features import ActorBox

DIRECTIONS = ("give", "receive")
CLASS_NAMES = ("give", "receive", "stand", "sit", "bend", "wave")
TEXTURES = ("horizontal", "vertical", "checker", "solid")
DIRECTION_CLASSES = (0, 1)


@dataclass(frozen=True)
class WorldConfig:
    frames: int = 16
    image_size: int = 32
    background_noise: float = 0.05
    frame_noise: float = 0.02
    object_sigma: float = 2.0
    object_intensity: float = 1.0
    actor_intensity: float = 0.15
    actor_contrast: float = 0.15
    proposal_jitter: float = 0.1
    distractor_proposals: int = 2

    def __post_init__(self):
        if self.frames < 2 or self.frames % 2:
            raise ConfigurationError(f"clips need an even frame count >= 2, got {self.frames}")
        if self.image_size < 24:
            raise ConfigurationError(f"image_size must be at least 24 pixels, got {self.image_size}")
        if self.object_sigma <= 0.0:
            raise ConfigurationError(f"object_sigma must be positive, got {self.object_sigma}")
        if min(self.actor_intensity, self.actor_contrast) < 0.0:
            raise ConfigurationError(
                f"actor intensity and contrast must be non-negative, got {self.actor_intensity}/{self.actor_contrast}"
            )

    @property
    def center_frame(self) -> int:
        return self.frames // 2


@dataclass(frozen=True)
class Scenario:
    direction: str
    seed: int
    actor_a: Optional[Tuple[float, float]] = None  # (x, y) pixel center
    actor_b: Optional[Tuple[float, float]] = None
    textures: Optional[Tuple[str, str]] = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigurationError(f"unknown direction {self.direction!r}; expected one of {DIRECTIONS}")


@dataclass
class LabeledActor:
    box: ActorBox
    labels: np.ndarray  # binary, one entry per class


@dataclass
class SyntheticClip:
    clip_id: str
    frames: Tensor  # [T, H_img, W_img, 1]
    actors: List[LabeledActor]
    scenario: Scenario
    proposals: List[ActorBox] = field(default_factory=list)
    object_track: Optional[np.ndarray] = None  # [T, 2] (x, y) pixel centers

    @property
    def boxes(self) -> List[ActorBox]:
        return [a.box for a in self.actors]

    @property
    def labels(self) -> np.ndarray:
        return np.stack([a.labels for a in self.actors]).astype(float)


def direction_labels(direction: str) -> Tuple[np.ndarray, np.ndarray]:
    """Direction part of the label vectors for actors A and B (B mirrors A)."""
    a = np.zeros(len(CLASS_NAMES), dtype=np.int64)
    b = np.zeros(len(CLASS_NAMES), dtype=np.int64)
    giver, taker = (a, b) if direction == "give" else (b, a)
    giver[0] = 1
    taker[1] = 1
    return a, b


def texture_pattern(texture: str, height: int, width: int) -> np.ndarray:
    rows, cols = np.mgrid[0:height, 0:width]
    if texture == "horizontal":
        return (rows % 2).astype(float)
    if texture == "vertical":
        return (cols % 2).astype(float)
    if texture == "checker":
        return ((rows + cols) % 2).astype(float)
    return np.full((height, width), 0.5)


def render_blob(center: Tuple[float, float], size: int, sigma: float, intensity: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size] + 0.5
    d2 = (xs - center[0]) ** 2 + (ys - center[1]) ** 2
    return intensity * np.exp(-d2 / (2.0 * sigma ** 2))


def object_position(t: int, direction: str, start: np.ndarray, end: np.ndarray, config: WorldConfig) -> np.ndarray:
    """Object center at frame t; the receive path is the give path reflected about the center frame."""
    sign = 1.0 if direction == "give" else -1.0
    offset = sign * (t - config.center_frame) / config.frames
    return (start + end) / 2.0 + offset * (end - start)


def _box_for(center: Tuple[float, float], half_w: int, half_h: int, size: int, rng=None, jitter: float = 0.0) -> ActorBox:
    x1, x2 = center[0] - half_w - 1.0, center[0] + half_w + 1.0
    y1, y2 = center[1] - half_h - 1.0, center[1] + half_h + 1.0
    if rng is not None and jitter > 0.0:
        w, h = x2 - x1, y2 - y1
        x1, x2 = x1 + rng.uniform(-jitter, jitter) * w, x2 + rng.uniform(-jitter, jitter) * w
        y1, y2 = y1 + rng.uniform(-jitter, jitter) * h, y2 + rng.uniform(-jitter, jitter) * h
    coords = [round(float(np.clip(v / size, 0.0, 1.0)), 6) for v in (x1, y1, x2, y2)]
    return ActorBox(*coords)


class ClipSimulator:
    """Renders deterministic clips from a seed and a direction."""

    def __init__(self, config: Optional[WorldConfig] = None):
        self.config = config or WorldConfig()
        self.logger = logging.getLogger("simulator.clip")

    def generate(self, seed: int, direction: str, clip_id: Optional[str] = None) -> SyntheticClip:
        cfg = self.config
        if direction not in DIRECTIONS:
            raise ConfigurationError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")
        # every draw below is independent of direction, so give/receive twins share layout and noise
        rng = np.random.default_rng(seed)
        size = cfg.image_size
        scale = size / 32.0

        a_center = (float(rng.integers(7, 11)) * scale, float(rng.integers(12, 21)) * scale)
        b_center = (float(rng.integers(22, 26)) * scale, float(rng.integers(12, 21)) * scale)
        half_sizes = [(int(rng.integers(3, 5)), int(rng.integers(5, 8))) for _ in range(2)]
        texture_ids = rng.integers(0, len(TEXTURES), size=2)

        scene = rng.uniform(0.0, cfg.background_noise, size=(size, size))
        for (cx, cy), (hw, hh), tex in zip((a_center, b_center), half_sizes, texture_ids):
            top, left = int(cy) - hh, int(cx) - hw
            pattern = texture_pattern(TEXTURES[tex], 2 * hh, 2 * hw)
            scene[top:top + 2 * hh, left:left + 2 * hw] = cfg.actor_intensity + cfg.actor_contrast * pattern

        # per-frame noise depends only on the distance to the center frame
        frame_noise = rng.uniform(-cfg.frame_noise, cfg.frame_noise, size=(cfg.center_frame + 1, size, size))

        start, end = np.array(a_center), np.array(b_center)
        frames = np.empty((cfg.frames, size, size, 1))
        track = np.empty((cfg.frames, 2))
        for t in range(cfg.frames):
            pos = object_position(t, direction, start, end, cfg)
            track[t] = pos
            blob = render_blob((pos[0], pos[1]), size, cfg.object_sigma * scale, cfg.object_intensity)
            frames[t, :, :, 0] = np.maximum(scene + frame_noise[abs(t - cfg.center_frame)], blob)
        # float32-representable values make clip dumps round-trip exactly
        frames = frames.astype(np.float32).astype(np.float64)

        boxes = [_box_for(c, hw, hh, size) for c, (hw, hh) in zip((a_center, b_center), half_sizes)]
        label_a, label_b = direction_labels(direction)
        label_a[2 + texture_ids[0]] = 1
        label_b[2 + texture_ids[1]] = 1
        actors = [
            LabeledActor(ActorBox(b.x1, b.y1, b.x2, b.y2, 1.0, True), labels)
            for b, labels in zip(boxes, (label_a, label_b))
        ]

        proposals = []
        for c, (hw, hh) in zip((a_center, b_center), half_sizes):
            box = _box_for(c, hw, hh, size, rng, cfg.proposal_jitter)
            proposals.append(ActorBox(box.x1, box.y1, box.x2, box.y2, round(float(rng.uniform(0.81, 1.0)), 6)))
        for _ in range(cfg.distractor_proposals):
            w, h = rng.uniform(0.1, 0.3, size=2)
            x1, y1 = rng.uniform(0.0, 1.0 - w), rng.uniform(0.0, 1.0 - h)
            proposals.append(ActorBox(
                round(float(x1), 6), round(float(y1), 6), round(float(x1 + w), 6), round(float(y1 + h), 6), round(float(rng.uniform(0.3, 0.79)), 6)
            ))

        scenario = Scenario(
            direction=direction,
            seed=seed,
            actor_a=a_center,
            actor_b=b_center,
            textures=(TEXTURES[texture_ids[0]], TEXTURES[texture_ids[1]]),
        )
        clip_id = clip_id or f"clip_{seed}_{direction}"
        self.logger.debug(f"generated {clip_id}: textures {scenario.textures}")
        return SyntheticClip(clip_id, Tensor(frames), actors, scenario, proposals, track)


def generate_clip(seed: int, direction: str, config: Optional[WorldConfig] = None, clip_id: Optional[str] = None) -> SyntheticClip:
    return ClipSimulator(config).generate(seed, direction, clip_id)


def reflect_about_center(frames: Tensor) -> Tensor:
    """Frame t of the result is frame (T - t) mod T of the input.

    Applied to a give clip this reproduces the receive twin on frames
    1..T-1; frame 0 stays the give clip's own first frame.
    """
    count = frames.shape[0]
    order = [(count - t) % count for t in range(count)]
    return Tensor(frames.data[order].copy())


def make_dataset(
    num_clips: int,
    seed: int,
    split: Sequence[float] = (0.8, 0.2),
    config: Optional[WorldConfig] = None,
) -> Tuple[List[SyntheticClip], List[SyntheticClip]]:
    """Deterministic (train, val) clips with round-robin give/receive balance."""
    if num_clips < 0:
        raise ConfigurationError(f"num_clips must be non-negative, got {num_clips}")
    if len(split) != 2 or min(split) < 0.0 or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigurationError(f"split ratios must be two non-negative values summing to 1, got {tuple(split)}")
    logger = logging.getLogger(f"simulator.dataset.{seed}")
    simulator = ClipSimulator(config)
    num_train = int(round(num_clips * split[0]))
    base = seed * 1_000_003

    train, val = [], []
    for i in range(num_clips):
        in_train = i < num_train
        position = i if in_train else i - num_train
        direction = DIRECTIONS[position % 2]
        name = f"train_{position:05d}" if in_train else f"val_{position:05d}"
        (train if in_train else val).append(simulator.generate(base + i, direction, clip_id=name))
    logger.info(f"dataset: {len(train)} train / {len(val)} val clips")
    return train, val
