"""Frozen two-pathway backbone stand-in.

Each pathway samples frames at its stride, cuts every frame into square
patches and maps each patch through a fixed projection whose weights
scatter around one, so a channel mostly measures the patch's summed
intensity. The result is scaled by a fixed per-cell gain that depends on
the cell's column:

- slow channels get a positive gain rising or falling across the frame,
  so an actor's features carry its horizontal position;
- fast channels get a signed horizontal ramp, so a spatially pooled fast
  token follows the horizontal position of whatever moves.

The map is linear with no bias: zero frames give zero features, and each
sampled frame is processed independently.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from core.errors import ConfigurationError
from core.tensor import Tensor
from model.features import PathwayFeatures
from simulators.clip_simulator import SyntheticClip


@dataclass(frozen=True)
class BackboneConfig:
    grid_size: int = 8
    slow_channels: int = 16
    fast_channels: int = 4
    slow_stride: int = 8
    fast_stride: int = 2
    gain_spread: float = 0.5
    weight_jitter: float = 0.5
    seed: int = 7

    def __post_init__(self):
        for name in ("grid_size", "slow_channels", "fast_channels", "slow_stride", "fast_stride"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"backbone {name} must be positive, got {getattr(self, name)}")
        if self.slow_stride % 2 or self.fast_stride % 2:
            raise ConfigurationError(
                f"pathway strides must be even for center-aligned sampling, got {self.slow_stride}/{self.fast_stride}"
            )
        if self.fast_stride >= self.slow_stride:
            raise ConfigurationError(
                f"fast stride {self.fast_stride} must be smaller than slow stride {self.slow_stride}"
            )
        if not 0.0 <= self.gain_spread < 1.0:
            raise ConfigurationError(f"gain_spread must lie in [0, 1), got {self.gain_spread}")
        if self.weight_jitter < 0.0:
            raise ConfigurationError(f"weight_jitter must be non-negative, got {self.weight_jitter}")


@dataclass(frozen=True)
class BackboneStubParams:
    slow_projection: np.ndarray  # [patch_dim, C_s]
    fast_projection: np.ndarray  # [patch_dim, C_f]
    slow_gain: np.ndarray  # [H, W, C_s], positive
    fast_gain: np.ndarray  # [H, W, C_f], signed
    slow_stride: int
    fast_stride: int
    patch_size: int

    @property
    def grid_size(self) -> int:
        return self.slow_gain.shape[0]


def column_ramp(grid_size: int) -> np.ndarray:
    """Horizontal cell coordinate per grid column, -1 at the left edge to 1 at the right."""
    return np.linspace(-1.0, 1.0, grid_size)


def channel_slopes(channels: int) -> np.ndarray:
    """+1, -1, +1, ... so every other channel mirrors its neighbour's gain."""
    return np.where(np.arange(channels) % 2 == 0, 1.0, -1.0)


def _gain_field(grid_size: int, channels: int, offset: float, slope: float) -> np.ndarray:
    ramp = column_ramp(grid_size)[None, :, None] * channel_slopes(channels)[None, None, :]
    return np.broadcast_to(offset + slope * ramp, (grid_size, grid_size, channels)).copy()


def create_backbone(config: BackboneConfig, image_size: int) -> BackboneStubParams:
    if image_size % config.grid_size:
        raise ConfigurationError(f"image size {image_size} is not divisible by grid size {config.grid_size}")
    patch = image_size // config.grid_size
    patch_dim = patch * patch
    rng = np.random.default_rng(config.seed)
    g = config.grid_size

    slow_projection = 1.0 + config.weight_jitter * rng.normal(size=(patch_dim, config.slow_channels))
    fast_projection = 1.0 + config.weight_jitter * rng.normal(size=(patch_dim, config.fast_channels))
    return BackboneStubParams(
        slow_projection=slow_projection,
        fast_projection=fast_projection,
        slow_gain=_gain_field(g, config.slow_channels, 1.0, config.gain_spread),
        fast_gain=_gain_field(g, config.fast_channels, 0.0, 1.0),
        slow_stride=config.slow_stride,
        fast_stride=config.fast_stride,
        patch_size=patch,
    )


def sampled_frames(count: int, stride: int) -> np.ndarray:
    """Center-aligned sample indices k*stride + stride//2."""
    return np.arange(count // stride) * stride + stride // 2


def _pathway(frames: np.ndarray, stride: int, projection: np.ndarray, gain: np.ndarray, patch: int) -> np.ndarray:
    picked = frames[sampled_frames(frames.shape[0], stride), :, :, 0]
    t, size = picked.shape[0], picked.shape[1]
    g = size // patch
    patches = picked.reshape(t, g, patch, g, patch).transpose(0, 1, 3, 2, 4).reshape(t, g, g, patch * patch)
    return (patches @ projection) * gain


def backbone_stub(clip: Union[SyntheticClip, Tensor], p: BackboneStubParams) -> PathwayFeatures:
    frames = clip.frames.data if isinstance(clip, SyntheticClip) else clip.data
    count, height, width = frames.shape[0], frames.shape[1], frames.shape[2]
    if count % p.slow_stride or count % p.fast_stride:
        raise ConfigurationError(
            f"{count} frames are not divisible by strides {p.slow_stride} and {p.fast_stride}"
        )
    if height != width or height != p.grid_size * p.patch_size:
        raise ConfigurationError(
            f"frames of {height}x{width} do not match a {p.grid_size}x{p.grid_size} grid of {p.patch_size}px patches"
        )
    slow = _pathway(frames, p.slow_stride, p.slow_projection, p.slow_gain, p.patch_size)
    fast = _pathway(frames, p.fast_stride, p.fast_projection, p.fast_gain, p.patch_size)
    logging.getLogger("simulator.backbone").debug(f"slow {slow.shape}, fast {fast.shape}")
    return PathwayFeatures(slow=Tensor(slow), fast=Tensor(fast))
