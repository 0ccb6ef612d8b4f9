"""Parameter containers, deterministic initialisation and parameter naming."""

import logging
from dataclasses import dataclass, fields, is_dataclass
from typing import Any, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from core.errors import ConfigurationError
from core.tensor import Tensor

logger = logging.getLogger(__name__)

VARIANTS = (
    "baseline",
    "spatial_ctx",
    "spatial_ctx+spatial_actors",
    "spatiotemporal_ctx",
    "spatiotemporal_ctx+spatial_actors",
)
ACTOR_GRID = 7


@dataclass
class LinearParams:
    weight: Tensor  # [in x out]
    bias: Tensor  # [out]

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]


@dataclass
class LayerNormParams:
    scale: Tensor
    shift: Tensor


@dataclass
class MultiHeadAttentionParams:
    num_heads: int
    query: LinearParams
    key: LinearParams
    value: LinearParams
    output: LinearParams

    def __post_init__(self):
        if self.num_heads < 1 or self.model_dim % self.num_heads:
            raise ConfigurationError(f"model_dim {self.model_dim} is not divisible by {self.num_heads} heads")

    @property
    def model_dim(self) -> int:
        return self.query.in_features

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass
class CrossAttentionBlockParams:
    attention: MultiHeadAttentionParams
    norm_attention: LayerNormParams
    norm_ffn: LayerNormParams
    ffn_hidden: LinearParams
    ffn_out: LinearParams

    def __post_init__(self):
        d = self.attention.model_dim
        if self.ffn_hidden.in_features != d or self.ffn_out.out_features != d:
            raise ConfigurationError(
                f"feed-forward chain {self.ffn_hidden.in_features}->{self.ffn_hidden.out_features}"
                f"->{self.ffn_out.out_features} does not close on model_dim {d}"
            )


@dataclass(frozen=True)
class HeadDims:
    """Everything needed to shape a head's parameters."""

    slow_channels: int
    fast_channels: int
    grid_height: int
    grid_width: int
    fast_frames: int
    num_classes: int = 6
    num_heads: int = 4
    ffn_hidden: Optional[int] = None
    variant: str = "spatiotemporal_ctx+spatial_actors"
    actor_positional: bool = True
    context_positional: bool = False
    zero_init_classifier: bool = True

    def __post_init__(self):
        for name in ("slow_channels", "fast_channels", "grid_height", "grid_width", "fast_frames", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown head variant {self.variant!r}; expected one of {VARIANTS}")
        if self.num_heads < 1 or self.model_dim % self.num_heads:
            raise ConfigurationError(f"model_dim {self.model_dim} is not divisible by {self.num_heads} heads")
        if self.ffn_hidden is not None and self.ffn_hidden < 1:
            raise ConfigurationError(f"ffn_hidden must be positive, got {self.ffn_hidden}")

    @property
    def model_dim(self) -> int:
        # actor queries enter attention unprojected, so the width is the concatenated channel count
        return self.slow_channels + self.fast_channels

    @property
    def hidden_dim(self) -> int:
        return self.ffn_hidden if self.ffn_hidden is not None else 2 * self.model_dim

    @property
    def spatial_tokens(self) -> int:
        return self.grid_height * self.grid_width


@dataclass
class HeadParams:
    dims: HeadDims
    classifier_hidden: LinearParams
    classifier_out: LinearParams
    slow_projection: Optional[LinearParams] = None
    fast_projection: Optional[LinearParams] = None
    context_projection: Optional[LinearParams] = None
    actor_position: Optional[Tensor] = None
    slow_position: Optional[Tensor] = None
    fast_position: Optional[Tensor] = None
    context_position: Optional[Tensor] = None
    block_spatial: Optional[CrossAttentionBlockParams] = None
    block_temporal: Optional[CrossAttentionBlockParams] = None

    @property
    def num_classes(self) -> int:
        return self.classifier_out.out_features


def named_parameters(params: Any, prefix: str = "") -> List[Tuple[str, Tensor]]:
    """Every trainable tensor under `params` with a dotted name, in declaration order."""
    return list(_walk(params, prefix))


def _walk(node: Any, prefix: str) -> Iterator[Tuple[str, Tensor]]:
    if isinstance(node, Tensor):
        yield prefix, node
    elif isinstance(node, Mapping):
        for key, value in node.items():
            yield from _walk(value, f"{prefix}.{key}" if prefix else str(key))
    elif is_dataclass(node):
        for f in fields(node):
            value = getattr(node, f.name)
            if value is None or isinstance(value, (int, float, str, bool, HeadDims)):
                continue
            yield from _walk(value, f"{prefix}.{f.name}" if prefix else f.name)


# ----------------------------------------------------------------------
# initialisation
# ----------------------------------------------------------------------
def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_linear(rng: np.random.Generator, in_features: int, out_features: int, zero: bool = False) -> LinearParams:
    weight = np.zeros((in_features, out_features)) if zero else xavier_uniform(rng, in_features, out_features)
    return LinearParams(weight=Tensor(weight), bias=Tensor(np.zeros(out_features)))


def init_layer_norm(dim: int) -> LayerNormParams:
    return LayerNormParams(scale=Tensor(np.ones(dim)), shift=Tensor(np.zeros(dim)))


def init_attention(rng: np.random.Generator, model_dim: int, num_heads: int) -> MultiHeadAttentionParams:
    return MultiHeadAttentionParams(
        num_heads=num_heads,
        query=init_linear(rng, model_dim, model_dim),
        key=init_linear(rng, model_dim, model_dim),
        value=init_linear(rng, model_dim, model_dim),
        output=init_linear(rng, model_dim, model_dim),
    )


def init_block(rng: np.random.Generator, model_dim: int, hidden_dim: int, num_heads: int) -> CrossAttentionBlockParams:
    return CrossAttentionBlockParams(
        attention=init_attention(rng, model_dim, num_heads),
        norm_attention=init_layer_norm(model_dim),
        norm_ffn=init_layer_norm(model_dim),
        ffn_hidden=init_linear(rng, model_dim, hidden_dim),
        ffn_out=init_linear(rng, hidden_dim, model_dim),
    )


def init_embedding(rng: np.random.Generator, positions: int, dim: int) -> Tensor:
    return Tensor(xavier_uniform(rng, positions, dim))


def init_params(dims: HeadDims, seed: int) -> HeadParams:
    """Deterministic head parameters for the wiring named by `dims.variant`."""
    rng = np.random.default_rng(seed)
    d, hidden = dims.model_dim, dims.hidden_dim
    context = "none" if dims.variant == "baseline" else dims.variant.split("+")[0]
    spatial_actors = dims.variant.endswith("+spatial_actors")

    params = HeadParams(
        dims=dims,
        classifier_hidden=init_linear(rng, d, d),
        classifier_out=init_linear(rng, d, dims.num_classes, zero=dims.zero_init_classifier),
    )
    if spatial_actors and dims.actor_positional:
        params.actor_position = init_embedding(rng, ACTOR_GRID * ACTOR_GRID, d)
    if context == "spatial_ctx":
        params.context_projection = init_linear(rng, d, d)
        params.block_spatial = init_block(rng, d, hidden, dims.num_heads)
        if dims.context_positional:
            params.context_position = init_embedding(rng, dims.spatial_tokens, d)
    elif context == "spatiotemporal_ctx":
        params.slow_projection = init_linear(rng, dims.slow_channels, d)
        params.fast_projection = init_linear(rng, dims.fast_channels, d)
        params.block_spatial = init_block(rng, d, hidden, dims.num_heads)
        params.block_temporal = init_block(rng, d, hidden, dims.num_heads)
        if dims.context_positional:
            params.slow_position = init_embedding(rng, dims.spatial_tokens, dims.slow_channels)
            params.fast_position = init_embedding(rng, dims.fast_frames, dims.fast_channels)

    count = sum(t.size for _, t in named_parameters(params))
    logger.debug(f"initialised {dims.variant} head: {count} parameters, seed {seed}")
    return params


def mark_trainable(params: Any) -> Any:
    for _, t in named_parameters(params):
        t.requires_grad = True
    return params
