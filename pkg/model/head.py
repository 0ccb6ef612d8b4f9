"""Spatio-temporal context head.

Actor queries (49 RoIAligned tokens each) are enriched first by the
temporally pooled slow map, then by the spatially pooled fast sequence,
reduced with a global max pool and classified by two linear layers.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from core.errors import ConfigurationError, ShapeError
from core.tensor import Tensor, gelu, reduce_max, reduce_mean, reshape, sigmoid, softplus, stack
from model.blocks import cross_attention_block, linear
from model.features import ActorFeature
from model.params import ACTOR_GRID, VARIANTS, HeadParams

ActorInput = Union[Sequence[ActorFeature], Tensor]


@dataclass(frozen=True)
class HeadWiring:
    variant: str
    context: str  # "none", "spatial" or "spatiotemporal"
    spatial_actors: bool


def ablation_variant(flag: str) -> HeadWiring:
    if flag not in VARIANTS:
        raise ConfigurationError(f"unknown ablation variant {flag!r}; expected one of {VARIANTS}")
    if flag == "baseline":
        return HeadWiring(flag, "none", False)
    context = "spatial" if flag.startswith("spatial_ctx") else "spatiotemporal"
    return HeadWiring(flag, context, flag.endswith("+spatial_actors"))


def global_max_pool(tokens: Tensor) -> Tensor:
    """Per-channel maximum over token positions, [..., n, C] -> [..., C]."""
    return reduce_max(tokens, axis=-2)


def _actor_tensor(actors: ActorInput) -> Tensor:
    if isinstance(actors, Tensor):
        return actors
    if not actors:
        raise ShapeError("head_forward needs at least one actor")
    return stack([a.tokens for a in actors], axis=0)


def _with_position(tokens: Tensor, position: Optional[Tensor]) -> Tensor:
    return tokens if position is None else tokens + position


def head_logits(
    actor_tokens: Tensor,
    slow_tokens: Optional[Tensor],
    fast_tokens: Optional[Tensor],
    p: HeadParams,
    pooled_tokens: Optional[Tensor] = None,
) -> Tensor:
    """Pre-sigmoid class scores, [..., N, num_classes].

    actor_tokens is [..., N, 49, C]; context token sets carry the same
    leading batch axes and are shared by every actor of a clip.
    """
    wiring = ablation_variant(p.dims.variant)
    if actor_tokens.ndim < 3 or actor_tokens.shape[-3] < 1:
        raise ShapeError(f"actor tokens must be [..., N, tokens, C] with N >= 1, got {actor_tokens.shape}")
    lead, num_actors, num_tokens, channels = (
        actor_tokens.shape[:-3], actor_tokens.shape[-3], actor_tokens.shape[-2], actor_tokens.shape[-1]
    )

    if wiring.context == "none":
        pooled = reduce_mean(actor_tokens, axis=-2)
        return _classify(pooled, p)

    if wiring.spatial_actors:
        if num_tokens != ACTOR_GRID * ACTOR_GRID:
            raise ShapeError(f"spatial actor queries need {ACTOR_GRID * ACTOR_GRID} tokens, got {num_tokens}")
        queries = _with_position(actor_tokens, p.actor_position)
        queries = reshape(queries, lead + (num_actors * num_tokens, channels))
        tokens_per_actor = num_tokens
    else:
        queries = reduce_mean(actor_tokens, axis=-2)
        tokens_per_actor = 1

    if wiring.context == "spatial":
        if pooled_tokens is None:
            raise ConfigurationError("spatial-context wiring needs the temporally pooled concatenated map")
        context = linear(_with_position(pooled_tokens, p.context_position), p.context_projection)
        enriched = cross_attention_block(queries, context, p.block_spatial)
    else:
        if slow_tokens is None or fast_tokens is None:
            raise ConfigurationError("spatio-temporal wiring needs slow and fast context tokens")
        slow = linear(_with_position(slow_tokens, p.slow_position), p.slow_projection)
        fast = linear(_with_position(fast_tokens, p.fast_position), p.fast_projection)
        enriched = cross_attention_block(queries, slow, p.block_spatial)
        enriched = cross_attention_block(enriched, fast, p.block_temporal)

    enriched = reshape(enriched, lead + (num_actors, tokens_per_actor, channels))
    return _classify(global_max_pool(enriched), p)


def _classify(features: Tensor, p: HeadParams) -> Tensor:
    return linear(gelu(linear(features, p.classifier_hidden)), p.classifier_out)


def head_forward(
    actors: ActorInput,
    slow_tokens: Optional[Tensor],
    fast_tokens: Optional[Tensor],
    p: HeadParams,
    pooled_tokens: Optional[Tensor] = None,
) -> Tensor:
    """Per-actor class probabilities, [N, num_classes], in actor order."""
    return sigmoid(head_logits(_actor_tensor(actors), slow_tokens, fast_tokens, p, pooled_tokens))


def bce_loss(logits: Tensor, labels: Union[np.ndarray, Tensor]) -> Tensor:
    """Mean binary cross-entropy over every actor-class cell, computed from logits."""
    target = labels.data if isinstance(labels, Tensor) else np.asarray(labels, dtype=float)
    if target.shape != logits.shape:
        raise ShapeError(f"labels shape {target.shape} does not match predictions {logits.shape}")
    if not np.all((target == 0.0) | (target == 1.0)):
        raise ValueError("labels must be binary")
    return reduce_mean(softplus(logits) - logits * target)


def time_reversal_sensitivity(
    actor_tokens: Tensor,
    slow_tokens: Tensor,
    fast_tokens: Tensor,
    p: HeadParams,
    pooled_tokens: Optional[Tensor] = None,
) -> float:
    """Mean absolute score change when the fast sequence is played backwards."""
    forward = head_forward(actor_tokens, slow_tokens, fast_tokens, p, pooled_tokens).data
    reversed_fast = Tensor(np.flip(fast_tokens.data, axis=-2).copy())
    backward = head_forward(actor_tokens, slow_tokens, reversed_fast, p, pooled_tokens).data
    return float(np.mean(np.abs(forward - backward)))
