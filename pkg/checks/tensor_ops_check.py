"""Gradient checks for the primitive tensor operations."""

from typing import Callable, Dict

import numpy as np

from checks.base import GradientCheckUnit
from core.gradcheck import grad_check
from core.tensor import (
    Tensor, concatenate, exp, gelu, matmul, permute, reduce_max, reduce_mean, reduce_sum, relu, reshape,
    sigmoid, softmax, softplus, take,
)


class TensorOpsCheck(GradientCheckUnit):
    name = "tensor_ops"
    component = "tensor_core"

    def _weighted(self, op: Callable[[Tensor], Tensor], x: np.ndarray) -> float:
        # random read-out weights so every output element contributes a distinct gradient
        weights = Tensor(self.randn(*op(Tensor(x)).shape))
        return grad_check(lambda t: reduce_sum(op(t) * weights), Tensor(x), self.eps)

    def measure(self) -> Dict[str, Dict[str, float]]:
        x = self.randn(3, 4)
        other = Tensor(self.randn(4, 5))
        batched = self.randn(2, 3, 4)
        shared = Tensor(self.randn(4, 2))
        distinct = self.randn(3, 4) + 10.0 * np.arange(12).reshape(3, 4)  # no ties for max
        off_kink = x + 0.1 * np.sign(x)

        linear = {
            "matmul": self._weighted(lambda t: matmul(t, other), x),
            "matmul_shared_rhs": self._weighted(lambda t: matmul(t, shared), batched),
            "matmul_rhs": self._weighted(lambda t: matmul(Tensor(x), t), other.data),
            "reduce_sum": self._weighted(lambda t: reduce_sum(t, axis=0), x),
            "reduce_mean": self._weighted(lambda t: reduce_mean(t, axis=-1, keepdims=True), batched),
            "reshape": self._weighted(lambda t: reshape(t, (4, 3)), x),
            "permute": self._weighted(lambda t: permute(t, (2, 0, 1)), batched),
            "concatenate": self._weighted(lambda t: concatenate([t, t * 2.0], axis=1), x),
            "take": self._weighted(lambda t: take(t, [2, 0, 2], axis=0), x),
            "index": self._weighted(lambda t: t[1:, ::2], x),
        }
        nonlinear = {
            "mul": self._weighted(lambda t: t * t, x),
            "power": self._weighted(lambda t: (t * t + 1.0) ** -0.5, x),
            "exp": self._weighted(exp, x),
            "relu": self._weighted(relu, off_kink),
            "gelu": self._weighted(gelu, x),
            "sigmoid": self._weighted(sigmoid, x),
            "softplus": self._weighted(softplus, x),
            "softmax": self._weighted(lambda t: softmax(t, axis=-1), batched),
            "reduce_max": self._weighted(lambda t: reduce_max(t, axis=1), distinct),
        }
        return {"linear": linear, "nonlinear": nonlinear}
