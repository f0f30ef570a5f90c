"""Differentiable primitives.

Broadcasting is limited to scalar-with-tensor: an operand with exactly one
element combines with any shape; every other elementwise pairing must match
exactly. ``add_bias`` is the one channel-wise exception, used by layers.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import Tensor, branch, get_default_dtype, record
from ..utils.error_handler import ShapeError

Axis = Optional[Union[int, Sequence[int]]]


def as_tensor(value, dtype=None) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False, dtype=dtype or get_default_dtype())


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    return np.asarray(grad.sum()).reshape(shape)


def _elementwise_operands(op: str, a, b) -> Tuple[Tensor, Tensor]:
    a = as_tensor(a)
    b = as_tensor(b, dtype=a.dtype)
    if a.data.shape != b.data.shape and a.size != 1 and b.size != 1:
        raise ShapeError(op, f"shapes {a.shape} and {b.shape} do not conform")
    return a, b


def _normalize_axes(axis: Axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    axes = []
    for ax in axis:
        if not -ndim <= ax < ndim:
            raise ShapeError('reduce', f"axis {ax} out of range for {ndim}-d tensor")
        axes.append(ax % ndim)
    return tuple(sorted(set(axes)))


def _as_output(array) -> np.ndarray:
    array = np.asarray(array)
    return array.reshape(1) if array.ndim == 0 else array


def add(a, b) -> Tensor:
    a, b = _elementwise_operands('add', a, b)
    out = a.data + b.data

    def backward(grad):
        return _unbroadcast(grad, a.data.shape), _unbroadcast(grad, b.data.shape)

    return record('add', (a, b), out, backward)


def sub(a, b) -> Tensor:
    a, b = _elementwise_operands('sub', a, b)
    out = a.data - b.data

    def backward(grad):
        return _unbroadcast(grad, a.data.shape), _unbroadcast(-grad, b.data.shape)

    return record('sub', (a, b), out, backward)


def mul(a, b) -> Tensor:
    """Hadamard (elementwise) product."""
    a, b = _elementwise_operands('mul', a, b)
    out = a.data * b.data

    def backward(grad):
        return _unbroadcast(grad * b.data, a.data.shape), _unbroadcast(grad * a.data, b.data.shape)

    return record('mul', (a, b), out, backward)


hadamard = mul


def scalar_mul(a: Tensor, scalar: float) -> Tensor:
    a = as_tensor(a)
    scalar = float(scalar)
    out = a.data * scalar

    def backward(grad):
        return (grad * scalar,)

    return record('scalar_mul', (a,), out, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-d matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError('matmul', f"expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError('matmul', f"inner dimensions differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(grad):
        return grad @ b.data.T, a.data.T @ grad

    return record('matmul', (a, b), out, backward)


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = branch(a.data > 0)
    out = np.where(mask, a.data, 0).astype(a.dtype)

    def backward(grad):
        return (grad * mask,)

    return record('relu', (a,), out, backward)


def absolute(a: Tensor) -> Tensor:
    """|a| with subgradient 0 at the kink."""
    a = as_tensor(a)
    sign = branch(np.sign(a.data))
    out = sign * a.data

    def backward(grad):
        return (grad * sign,)

    return record('abs', (a,), out, backward)


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = a.data * a.data

    def backward(grad):
        return (grad * 2.0 * a.data,)

    return record('square', (a,), out, backward)


def sum(a: Tensor, axis: Axis = None) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    keep_shape = tuple(1 if i in axes else d for i, d in enumerate(a.data.shape))
    out = _as_output(a.data.sum(axis=axes))

    def backward(grad):
        return (np.broadcast_to(grad.reshape(keep_shape), a.data.shape).copy(),)

    return record('sum', (a,), out, backward)


def mean(a: Tensor, axis: Axis = None) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.data.shape[i] for i in axes]))
    keep_shape = tuple(1 if i in axes else d for i, d in enumerate(a.data.shape))
    out = _as_output(a.data.sum(axis=axes) / count)

    def backward(grad):
        return (np.broadcast_to(grad.reshape(keep_shape) / count, a.data.shape).copy(),)

    return record('mean', (a,), out, backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != a.size or any(d < 1 for d in shape):
        raise ShapeError('reshape', f"cannot reshape {a.shape} to {list(shape)}")
    out = a.data.reshape(shape)

    def backward(grad):
        return (grad.reshape(a.data.shape),)

    return record('reshape', (a,), out, backward)


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError('transpose', f"axes {list(axes)} are not a permutation for {a.ndim}-d tensor")
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))

    def backward(grad):
        return (grad.transpose(inverse),)

    return record('transpose', (a,), out, backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError('concat', "needs at least one tensor")
    ndim = tensors[0].ndim
    axis = _normalize_axes(axis, ndim)[0]
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.data.shape[i] != tensors[0].data.shape[i] for i in range(ndim) if i != axis
        ):
            raise ShapeError('concat', f"shapes {[x.shape for x in tensors]} differ off axis {axis}")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, splits, axis=axis))

    return record('concat', tuple(tensors), out, backward)


def add_bias(x: Tensor, bias: Tensor, axis: int = 1) -> Tensor:
    """x + bias laid along ``axis`` (bias has shape [x.shape[axis]])."""
    x, bias = as_tensor(x), as_tensor(bias)
    axis = _normalize_axes(axis, x.ndim)[0]
    if bias.ndim != 1 or bias.shape[0] != x.shape[axis]:
        raise ShapeError('add_bias', f"bias {bias.shape} does not match axis {axis} of {x.shape}")
    view = [1] * x.ndim
    view[axis] = bias.shape[0]
    out = x.data + bias.data.reshape(view)
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def backward(grad):
        return grad, grad.sum(axis=reduce_axes)

    return record('add_bias', (x, bias), out, backward)
