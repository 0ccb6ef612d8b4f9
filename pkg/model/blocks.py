"""Linear, layer-norm, multi-head cross attention and the pre-norm cross-attention block.

All functions accept leading batch axes; the trailing axis is the feature
axis and the one before it indexes tokens.
"""

import math

from core.errors import EmptyContextError, ShapeError
from core.tensor import Tensor, gelu, matmul, permute, reduce_mean, reshape, softmax
from model.params import CrossAttentionBlockParams, LinearParams, MultiHeadAttentionParams

LAYER_NORM_EPS = 1e-9


def linear(x: Tensor, p: LinearParams) -> Tensor:
    if x.shape[-1] != p.in_features:
        raise ShapeError(f"linear layer expects {p.in_features} input features, got shape {x.shape}")
    return matmul(x, p.weight) + p.bias


def layer_norm(x: Tensor, scale: Tensor, shift: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    centered = x - reduce_mean(x, axis=-1, keepdims=True)
    variance = reduce_mean(centered * centered, axis=-1, keepdims=True)
    return centered * (variance + eps) ** -0.5 * scale + shift


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    # [..., n, d] -> [..., heads, n, head_dim]
    lead, n, d = x.shape[:-2], x.shape[-2], x.shape[-1]
    x = reshape(x, lead + (n, num_heads, d // num_heads))
    k = len(lead)
    return permute(x, tuple(range(k)) + (k + 1, k, k + 2))


def _merge_heads(x: Tensor) -> Tensor:
    # [..., heads, n, head_dim] -> [..., n, d]
    lead, heads, n, head_dim = x.shape[:-3], x.shape[-3], x.shape[-2], x.shape[-1]
    k = len(lead)
    x = permute(x, tuple(range(k)) + (k + 1, k, k + 2))
    return reshape(x, lead + (n, heads * head_dim))


def attention_weights(queries: Tensor, context: Tensor, p: MultiHeadAttentionParams) -> Tensor:
    """Softmax attention weights per head, shape [..., heads, n_q, n_kv]."""
    q, k, _ = _project(queries, context, p)
    return _weights(q, k, p.head_dim)


def _project(queries: Tensor, context: Tensor, p: MultiHeadAttentionParams):
    if queries.shape[-2] < 1:
        raise ShapeError(f"attention needs at least one query, got shape {queries.shape}")
    if context.shape[-2] < 1:
        raise EmptyContextError(f"attention context is empty (shape {context.shape})")
    if queries.shape[:-2] != context.shape[:-2]:
        raise ShapeError(f"query batch {queries.shape} does not match context batch {context.shape}")
    q = _split_heads(linear(queries, p.query), p.num_heads)
    k = _split_heads(linear(context, p.key), p.num_heads)
    v = _split_heads(linear(context, p.value), p.num_heads)
    return q, k, v


def _weights(q: Tensor, k: Tensor, head_dim: int) -> Tensor:
    logits = matmul(q, k.transpose(-2, -1)) * (1.0 / math.sqrt(head_dim))
    return softmax(logits, axis=-1)


def multi_head_cross_attention(queries: Tensor, context: Tensor, p: MultiHeadAttentionParams) -> Tensor:
    q, k, v = _project(queries, context, p)
    attended = matmul(_weights(q, k, p.head_dim), v)
    return linear(_merge_heads(attended), p.output)


def feed_forward(x: Tensor, p: CrossAttentionBlockParams) -> Tensor:
    return linear(gelu(linear(x, p.ffn_hidden)), p.ffn_out)


def cross_attention_block(queries: Tensor, context: Tensor, p: CrossAttentionBlockParams) -> Tensor:
    x = queries + multi_head_cross_attention(
        layer_norm(queries, p.norm_attention.scale, p.norm_attention.shift), context, p.attention
    )
    return x + feed_forward(layer_norm(x, p.norm_ffn.scale, p.norm_ffn.shift), p)
