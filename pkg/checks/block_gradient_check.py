"""Gradient checks for the attention blocks and the feature pipeline."""

from typing import Dict

from checks.base import GradientCheckUnit
from core.gradcheck import grad_check_tensors
from core.tensor import Tensor, reduce_sum
from model.blocks import cross_attention_block, feed_forward, layer_norm, linear, multi_head_cross_attention
from model.features import ActorBox, roi_align, spatial_pool, temporal_pool
from model.params import init_block, init_linear, named_parameters


def _prefixed(prefix: str, errors: Dict[str, float]) -> Dict[str, float]:
    return {f"{prefix}.{name}": err for name, err in errors.items()}


class BlockGradientCheck(GradientCheckUnit):
    name = "blocks"
    component = "nn_blocks"

    def _readout(self, shape):
        return Tensor(self.randn(*shape))

    def measure(self) -> Dict[str, Dict[str, float]]:
        d, hidden, heads = 8, 12, 2
        x = Tensor(self.randn(2, 3, d))
        context = Tensor(self.randn(2, 5, d))
        w = self._readout((2, 3, d))
        block = init_block(self.rng, d, hidden, heads)
        lin = init_linear(self.rng, d, 4)
        w_lin = self._readout((2, 3, 4))

        linear_errors = _prefixed("linear", grad_check_tensors(
            lambda: reduce_sum(linear(x, lin) * w_lin),
            {"x": x, "weight": lin.weight, "bias": lin.bias}, self.eps,
        ))

        fmap = Tensor(self.randn(6, 6, 3))
        box = ActorBox(0.1, 0.2, 0.8, 0.7)
        w_roi = self._readout((7, 7, 3))
        linear_errors.update(_prefixed("roi_align", grad_check_tensors(
            lambda: reduce_sum(roi_align(fmap, box) * w_roi), {"fmap": fmap}, self.eps,
        )))
        features = Tensor(self.randn(4, 3, 3, 2))
        w_t, w_s = self._readout((3, 3, 2)), self._readout((4, 2))
        linear_errors.update(_prefixed("pooling", grad_check_tensors(
            lambda: reduce_sum(temporal_pool(features) * w_t) + reduce_sum(spatial_pool(features) * w_s),
            {"features": features}, self.eps,
        )))

        norm = block.norm_attention
        nonlinear = _prefixed("layer_norm", grad_check_tensors(
            lambda: reduce_sum(layer_norm(x, norm.scale, norm.shift) * w),
            {"x": x, "scale": norm.scale, "shift": norm.shift}, self.eps,
        ))
        nonlinear.update(_prefixed("multi_head_cross_attention", grad_check_tensors(
            lambda: reduce_sum(multi_head_cross_attention(x, context, block.attention) * w),
            {"queries": x, "context": context, **dict(named_parameters(block.attention))}, self.eps,
        )))
        nonlinear.update(_prefixed("feed_forward", grad_check_tensors(
            lambda: reduce_sum(feed_forward(x, block) * w),
            {"x": x, **dict(named_parameters(block.ffn_hidden, "ffn_hidden")),
             **dict(named_parameters(block.ffn_out, "ffn_out"))}, self.eps,
        )))
        nonlinear.update(_prefixed("cross_attention_block", grad_check_tensors(
            lambda: reduce_sum(cross_attention_block(x, context, block) * w),
            {"queries": x, "context": context, **dict(named_parameters(block))}, self.eps,
        )))
        return {"linear": linear_errors, "nonlinear": nonlinear}
