"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation is a `Function` subclass with a numpy
forward and a backward rule. Calling `Tensor.backward()` records the graph
that produced the tensor into a `Tape` (topological order) and replays the
backward rules in reverse, accumulating gradients into leaf tensors.
"""

import math
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ShapeError

DTYPE = np.float64
GELU_COEFF = math.sqrt(2.0 / math.pi)

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]
Operand = Union["Tensor", float, int]


class Function:
    """Base class for differentiable operations."""

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*inputs)
        out_data = func.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor(out_data, requires_grad=requires_grad, creator=func if requires_grad else None)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array plus optional gradient tracking."""

    def __init__(self, data: ArrayLike, requires_grad: bool = False, creator: Optional[Function] = None):
        self.data = np.ascontiguousarray(np.asarray(data, dtype=DTYPE))
        self.requires_grad = requires_grad
        self.creator = creator
        self.grad: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # metadata
    # ------------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # backward
    # ------------------------------------------------------------------
    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed gradient needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad, dtype=DTYPE)
            if seed.shape != self.shape:
                raise ShapeError(f"seed gradient shape {seed.shape} does not match tensor shape {self.shape}")
        Tape.record(self).backward(self, seed)

    # ------------------------------------------------------------------
    # operators
    # ------------------------------------------------------------------
    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Union[float, int]) -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return Index.apply(self, index=index)

    # method spellings of the functional API
    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return reduce_mean(self, axis, keepdims)

    def max(self, axis: int, keepdims: bool = False) -> "Tensor":
        return reduce_max(self, axis, keepdims)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes: int) -> "Tensor":
        return permute(self, axes)

    def transpose(self, axis_a: int = -2, axis_b: int = -1) -> "Tensor":
        return transpose(self, axis_a, axis_b)


class Tape:
    """Operations that produced an output, in topological order (inputs first)."""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def record(cls, output: Tensor) -> "Tape":
        order: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node.creator is not None:
                for parent in node.creator.inputs:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))
        return cls(order)

    def backward(self, output: Tensor, seed: np.ndarray) -> None:
        grads = {id(output): seed}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.creator is None:
                if node.requires_grad:
                    node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node.creator.backward(grad)
            for parent, parent_grad in zip(node.creator.inputs, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# ----------------------------------------------------------------------
# elementwise
# ----------------------------------------------------------------------
class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return unbroadcast(grad, self.shapes[0]), unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return unbroadcast(grad * self.b, self.a.shape), unbroadcast(grad * self.a, self.b.shape)


class Power(Function):
    def forward(self, x, exponent):
        self.x, self.exponent = x, exponent
        return np.power(x, exponent)

    def backward(self, grad):
        return (grad * self.exponent * np.power(self.x, self.exponent - 1.0),)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class GELU(Function):
    """Tanh approximation of the Gaussian error linear unit."""

    def forward(self, x):
        self.x = x
        self.t = np.tanh(GELU_COEFF * (x + 0.044715 * x ** 3))
        return 0.5 * x * (1.0 + self.t)

    def backward(self, grad):
        x, t = self.x, self.t
        inner = GELU_COEFF * (1.0 + 3.0 * 0.044715 * x ** 2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * inner),)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Sigmoid(Function):
    def forward(self, x):
        self.out = _stable_sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Softplus(Function):
    def forward(self, x):
        self.x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad):
        return (grad * _stable_sigmoid(self.x),)


# ----------------------------------------------------------------------
# linear algebra
# ----------------------------------------------------------------------
class MatMul(Function):
    """Matrix product over the trailing two axes.

    Leading axes of `a` and `b` must match, or `b` may be a plain matrix
    shared across every leading index of `a`.
    """

    def forward(self, a, b):
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.a, self.b
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        if b.ndim == 2 and a.ndim > 2:
            grad_b = a.reshape(-1, a.shape[-1]).T @ grad.reshape(-1, grad.shape[-1])
        else:
            grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return grad_a, grad_b


# ----------------------------------------------------------------------
# reductions
# ----------------------------------------------------------------------
def _normalise_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for rank {ndim}")
    return axis % ndim


class Sum(Function):
    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Max(Function):
    """Maximum along one axis; the gradient goes to the first argmax."""

    def forward(self, x, axis, keepdims):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        self.index = np.expand_dims(np.argmax(x, axis=axis), axis)
        return np.max(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        out = np.zeros(self.shape, dtype=DTYPE)
        np.put_along_axis(out, self.index, grad, axis=self.axis)
        return (out,)


class Softmax(Function):
    def forward(self, x, axis):
        self.axis = axis
        shifted = np.exp(x - np.max(x, axis=axis, keepdims=True))
        self.out = shifted / np.sum(shifted, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        inner = np.sum(grad * self.out, axis=self.axis, keepdims=True)
        return (self.out * (grad - inner),)


# ----------------------------------------------------------------------
# layout
# ----------------------------------------------------------------------
class Reshape(Function):
    def forward(self, x, shape):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Permute(Function):
    def forward(self, x, axes):
        self.inverse = tuple(np.argsort(axes))
        return np.ascontiguousarray(np.transpose(x, axes))

    def backward(self, grad):
        return (np.transpose(grad, self.inverse),)


class Concatenate(Function):
    def forward(self, *arrays, axis):
        self.axis = axis
        self.bounds = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.bounds, axis=self.axis))


class Index(Function):
    """Basic slicing or advanced gathering; repeated indices accumulate."""

    def forward(self, x, index):
        self.shape, self.index = x.shape, index
        return np.array(x[index])

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=DTYPE)
        np.add.at(out, self.index, grad)
        return (out,)


# ----------------------------------------------------------------------
# functional API
# ----------------------------------------------------------------------
def tensor(data: ArrayLike, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def add(a: Operand, b: Operand) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Operand, b: Operand) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Operand, b: Operand) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def power(x: Tensor, exponent: float) -> Tensor:
    return Power.apply(x, exponent=float(exponent))


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def gelu(x: Tensor) -> Tensor:
    return GELU.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def softplus(x: Tensor) -> Tensor:
    return Softplus.apply(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul leading extents differ: {a.shape} x {b.shape}")
    return MatMul.apply(a, b)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=_normalise_axis(axis, x.ndim))


def reduce_sum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    if axis is not None:
        axis = _normalise_axis(axis, x.ndim)
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def reduce_mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[_normalise_axis(axis, x.ndim)]
    if count == 0:
        raise ShapeError(f"mean over an empty axis of shape {x.shape}")
    return mul(reduce_sum(x, axis, keepdims), 1.0 / count)


def reduce_max(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    axis = _normalise_axis(axis, x.ndim)
    if x.shape[axis] == 0:
        raise ShapeError(f"max over an empty axis of shape {x.shape}")
    return Max.apply(x, axis=axis, keepdims=keepdims)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        np.empty(x.shape, dtype=np.int8).reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {x.shape} into {shape}") from exc
    return Reshape.apply(x, shape=shape)


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(_normalise_axis(a, x.ndim) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"{axes} is not a permutation of the axes of {x.shape}")
    return Permute.apply(x, axes=axes)


def transpose(x: Tensor, axis_a: int = -2, axis_b: int = -1) -> Tensor:
    axes = list(range(x.ndim))
    a, b = _normalise_axis(axis_a, x.ndim), _normalise_axis(axis_b, x.ndim)
    axes[a], axes[b] = axes[b], axes[a]
    return permute(x, axes)


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concatenate needs at least one tensor")
    axis = _normalise_axis(axis, tensors[0].ndim)
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(reference) or any(
            t.shape[i] != reference[i] for i in range(len(reference)) if i != axis
        ):
            raise ShapeError(f"cannot concatenate {t.shape} with {reference} along axis {axis}")
    return Concatenate.apply(*tensors, axis=axis)


def take(x: Tensor, indices: Sequence[int], axis: int = 0) -> Tensor:
    """Gather entries along one axis."""
    axis = _normalise_axis(axis, x.ndim)
    index = [slice(None)] * x.ndim
    index[axis] = np.asarray(indices, dtype=np.intp)
    return Index.apply(x, index=tuple(index))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("stack needs at least one tensor")
    axis = _normalise_axis(axis, tensors[0].ndim + 1)
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concatenate(expanded, axis=axis)
