"""SGD with momentum over any parameter container `named_parameters` can walk."""

from typing import Any, Dict, Optional

import numpy as np

from core.errors import TrainingDivergenceError
from model.params import named_parameters


def sgd_step(params: Any, velocities: Dict[str, np.ndarray], lr: float, momentum: float) -> Any:
    """velocity = momentum * velocity + grad; param -= lr * velocity.

    Missing gradients count as zero. Nothing is updated unless every
    gradient is finite.
    """
    named = named_parameters(params)
    grads = {}
    for name, t in named:
        grad = t.grad if t.grad is not None else np.zeros_like(t.data)
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError(f"non-finite gradient in parameter {name}")
        grads[name] = grad
    for name, t in named:
        velocity = velocities.get(name)
        velocity = grads[name] if velocity is None else momentum * velocity + grads[name]
        velocities[name] = velocity
        t.data = t.data - lr * velocity
    return params


def zero_grad(params: Any) -> None:
    for _, t in named_parameters(params):
        t.zero_grad()


class SGD:
    """Stateful wrapper around `sgd_step` that owns the velocity buffers."""

    def __init__(self, lr: float, momentum: float = 0.9, velocities: Optional[Dict[str, np.ndarray]] = None):
        self.lr = lr
        self.momentum = momentum
        self.velocities: Dict[str, np.ndarray] = dict(velocities or {})
        self.steps = 0

    def step(self, params: Any) -> Any:
        sgd_step(params, self.velocities, self.lr, self.momentum)
        self.steps += 1
        return params

    def zero_grad(self, params: Any) -> None:
        zero_grad(params)
