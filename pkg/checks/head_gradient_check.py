"""Full-head gradient check, every parameter tensor of every wiring."""

from typing import Dict

from checks.base import GradientCheckUnit
from core.gradcheck import grad_check_tensors
from core.tensor import Tensor
from model.head import bce_loss, head_logits
from model.params import ACTOR_GRID, HeadDims, init_params, named_parameters


class HeadGradientCheck(GradientCheckUnit):
    name = "head"
    component = "context_head"

    def mini_dims(self, variant: str) -> HeadDims:
        return HeadDims(
            slow_channels=4, fast_channels=4, grid_height=3, grid_width=3, fast_frames=4, num_classes=5,
            num_heads=2, variant=variant, context_positional=True, zero_init_classifier=False,
        )

    def check_variant(self, variant: str) -> Dict[str, float]:
        dims = self.mini_dims(variant)
        params = init_params(dims, self.spec.seed)
        actors = Tensor(self.randn(2, ACTOR_GRID * ACTOR_GRID, dims.model_dim))
        slow = Tensor(self.randn(dims.spatial_tokens, dims.slow_channels))
        fast = Tensor(self.randn(dims.fast_frames, dims.fast_channels))
        pooled = Tensor(self.randn(dims.spatial_tokens, dims.model_dim))
        labels = (self.rng.random((2, dims.num_classes)) < 0.5).astype(float)

        named = dict(named_parameters(params))
        errors = grad_check_tensors(lambda: bce_loss(head_logits(actors, slow, fast, params, pooled), labels),
                                    named, self.eps)
        self.logger.info(f"{variant}: {len(errors)} parameter tensors, max error {max(errors.values()):.3e}")
        return {f"{variant}.{name}": err for name, err in errors.items()}

    def measure(self) -> Dict[str, Dict[str, float]]:
        nonlinear: Dict[str, float] = {}
        for variant in self.spec.variants:
            nonlinear.update(self.check_variant(variant))
        return {"linear": {}, "nonlinear": nonlinear}
