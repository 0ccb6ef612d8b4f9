"""Central finite-difference verification of analytic gradients."""

import logging
from typing import Callable, Dict, Mapping

import numpy as np

from core.errors import ConfigurationError, GradientCheckError, ShapeError
from core.tensor import Tensor

logger = logging.getLogger(__name__)

MIN_EPS = 1e-6
MAX_EPS = 1e-4


def _validate_eps(eps: float) -> None:
    if not MIN_EPS <= eps <= MAX_EPS:
        raise ConfigurationError(f"finite-difference step {eps} outside [{MIN_EPS}, {MAX_EPS}]")


def _scalar(value: Tensor, where: str) -> float:
    if value.size != 1:
        raise ShapeError(f"gradient check needs a scalar objective, got shape {value.shape}")
    result = value.item()
    if not np.isfinite(result):
        raise GradientCheckError(f"non-finite objective {result} {where}")
    return result


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / scale


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between backprop and central differences of `f` at `x`."""
    _validate_eps(eps)
    base = x.data.copy()

    point = Tensor(base.copy(), requires_grad=True)
    out = f(point)
    _scalar(out, "at the unperturbed point")
    out.backward()
    analytic = point.grad if point.grad is not None else np.zeros_like(base)

    numeric = np.zeros_like(base)
    flat = numeric.reshape(-1)
    for i in range(base.size):
        shifted = base.copy().reshape(-1)
        shifted[i] += eps
        f_plus = _scalar(f(Tensor(shifted.reshape(base.shape))), f"while perturbing coordinate {i}")
        shifted[i] -= 2.0 * eps
        f_minus = _scalar(f(Tensor(shifted.reshape(base.shape))), f"while perturbing coordinate {i}")
        flat[i] = (f_plus - f_minus) / (2.0 * eps)

    if base.size == 0:
        return 0.0
    return float(np.max(relative_error(analytic, numeric)))


def grad_check_tensors(
    objective: Callable[[], Tensor],
    tensors: Mapping[str, Tensor],
    eps: float = 1e-5,
) -> Dict[str, float]:
    """Gradient-check a closure with respect to several named leaf tensors.

    Each tensor's data is perturbed in turn and restored afterwards; the
    closure must read the tensors' current data on every call.
    """
    _validate_eps(eps)
    for t in tensors.values():
        t.requires_grad = True
        t.zero_grad()
    out = objective()
    _scalar(out, "at the unperturbed point")
    out.backward()

    errors: Dict[str, float] = {}
    for name, t in tensors.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        original = t.data
        numeric = np.zeros(original.size)
        try:
            for i in range(original.size):
                shifted = original.copy().reshape(-1)
                shifted[i] += eps
                t.data = shifted.reshape(original.shape)
                f_plus = _scalar(objective(), f"while perturbing {name}[{i}]")
                shifted[i] -= 2.0 * eps
                t.data = shifted.reshape(original.shape)
                f_minus = _scalar(objective(), f"while perturbing {name}[{i}]")
                numeric[i] = (f_plus - f_minus) / (2.0 * eps)
        finally:
            t.data = original
        err = relative_error(analytic.reshape(-1), numeric)
        errors[name] = float(np.max(err)) if err.size else 0.0
        logger.debug(f"{name}: max relative error {errors[name]:.3e}")
    return errors
