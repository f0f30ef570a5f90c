"""Layer kernels with analytic backward rules.

Convolution unfolds every receptive field with ``sliding_window_view`` and
contracts channels and kernel offsets in one ``np.tensordot`` per batch chunk.
Pooling iterates over kernel offsets. Chunking depends only on the shapes,
so results are bitwise reproducible.
"""
import itertools
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..autodiff.ops import as_tensor
from ..autodiff.tensor import Tensor, branch, record
from ..utils.error_handler import GeometryError, ShapeError

Triple = Tuple[int, int, int]

# Unfolded elements materialized per convolution chunk
COLUMN_BUDGET = 1 << 24


def triple(value) -> Triple:
    if isinstance(value, int):
        return (value, value, value)
    value = tuple(int(v) for v in value)
    if len(value) != 3:
        raise ShapeError('triple', f"expected 3 extents, got {value}")
    return value


def output_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    """floor((size + 2*padding - kernel) / stride) + 1."""
    return (size + 2 * padding - kernel) // stride + 1


def output_geometry(op: str, spatial: Sequence[int], kernel: Triple, stride: Triple,
                    padding: Triple) -> Triple:
    extents = tuple(output_extent(s, k, st, p) for s, k, st, p in zip(spatial, kernel, stride, padding))
    if any(e < 1 for e in extents):
        raise GeometryError(
            f"{op}: input {list(spatial)} with kernel {list(kernel)}, stride {list(stride)}, "
            f"padding {list(padding)} gives output extents {list(extents)}"
        )
    return extents


def _window(offset: Triple, stride: Triple, extents: Triple):
    (a, b, c), (st, sh, sw), (to, ho, wo) = offset, stride, extents
    return (slice(None), slice(None),
            slice(a, a + st * (to - 1) + 1, st),
            slice(b, b + sh * (ho - 1) + 1, sh),
            slice(c, c + sw * (wo - 1) + 1, sw))


def _pad(array: np.ndarray, padding: Triple, value: float = 0.0) -> np.ndarray:
    if not any(padding):
        return array
    pt, ph, pw = padding
    return np.pad(array, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)), constant_values=value)


def _unpad(array: np.ndarray, padding: Triple) -> np.ndarray:
    pt, ph, pw = padding
    _, _, t, h, w = array.shape
    return array[:, :, pt:t - pt, ph:h - ph, pw:w - pw]


def _columns(xp: np.ndarray, kernel: Triple, stride: Triple, extents: Triple) -> np.ndarray:
    """Strided view [B,to,ho,wo,C,kt,kh,kw] of every receptive field of a padded input."""
    (st, sh, sw), (to, ho, wo) = stride, extents
    windows = sliding_window_view(xp, kernel, axis=(2, 3, 4))
    windows = windows[:, :, :st * (to - 1) + 1:st, :sh * (ho - 1) + 1:sh, :sw * (wo - 1) + 1:sw]
    return windows.transpose(0, 2, 3, 4, 1, 5, 6, 7)


def _batch_chunks(columns: np.ndarray):
    per_sample = int(np.prod(columns.shape[1:]))
    step = max(1, COLUMN_BUDGET // max(per_sample, 1))
    return [slice(start, start + step) for start in range(0, columns.shape[0], step)]


def conv3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride=1, padding=0) -> Tensor:
    """Zero-padded 3D cross-correlation of [B,C,T,H,W] with [O,C,kt,kh,kw]."""
    x, weight = as_tensor(x), as_tensor(weight)
    stride, padding = triple(stride), triple(padding)
    if x.ndim != 5 or weight.ndim != 5:
        raise ShapeError('conv3d', f"expects 5-d input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError('conv3d', f"input has {x.shape[1]} channels, weight expects {weight.shape[1]}")

    kernel = tuple(weight.shape[2:])
    extents = output_geometry('conv3d', x.shape[2:], kernel, stride, padding)
    offsets = list(itertools.product(*(range(k) for k in kernel)))

    xp = _pad(x.data, padding)
    columns = _columns(xp, kernel, stride, extents)
    chunks = _batch_chunks(columns)
    contracted = ([4, 5, 6, 7], [1, 2, 3, 4])

    out = np.empty((x.shape[0],) + extents + (weight.shape[0],), dtype=x.dtype)
    for part in chunks:
        out[part] = np.tensordot(columns[part], weight.data, axes=contracted)
    out = np.ascontiguousarray(out.transpose(0, 4, 1, 2, 3))
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1, 1)

    def backward(grad):
        grad_last = grad.transpose(0, 2, 3, 4, 1)
        grad_w = np.zeros_like(weight.data)
        grad_xp = np.zeros_like(xp) if x.requires_grad else None
        for part in chunks:
            grad_w += np.tensordot(grad_last[part], columns[part], axes=([0, 1, 2, 3], [0, 1, 2, 3]))
            if grad_xp is None:
                continue
            # [b,C,to,ho,wo,kt,kh,kw], folded back one kernel offset at a time
            grad_columns = np.tensordot(grad_last[part], weight.data, axes=([4], [0]))
            grad_columns = grad_columns.transpose(0, 4, 1, 2, 3, 5, 6, 7)
            target = grad_xp[part]
            for offset in offsets:
                target[_window(offset, stride, extents)] += grad_columns[(Ellipsis,) + offset]
        grad_b = grad.sum(axis=(0, 2, 3, 4)) if bias is not None else None
        grad_x = _unpad(grad_xp, padding) if grad_xp is not None else None
        return grad_x, grad_w, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record('conv3d', inputs, out, backward)


def max_pool3d(x: Tensor, kernel, stride=None, padding=0) -> Tensor:
    """Max pooling over [B,C,T,H,W]; ties route the gradient to the first maximum."""
    x = as_tensor(x)
    kernel = triple(kernel)
    stride = kernel if stride is None else triple(stride)
    padding = triple(padding)
    if x.ndim != 5:
        raise ShapeError('max_pool3d', f"expects 5-d input, got {x.shape}")

    extents = output_geometry('max_pool3d', x.shape[2:], kernel, stride, padding)
    offsets = list(itertools.product(*(range(k) for k in kernel)))
    xp = _pad(x.data, padding, value=-np.inf)

    out = np.full(x.shape[:2] + list(extents), -np.inf, dtype=x.dtype)
    argmax = np.zeros(out.shape, dtype=np.int32)
    for index, offset in enumerate(offsets):
        patch = xp[_window(offset, stride, extents)]
        better = patch > out
        out = np.where(better, patch, out)
        argmax[better] = index

    frozen = branch(argmax)
    if frozen is not argmax:
        argmax = frozen
        for index, offset in enumerate(offsets):
            out = np.where(argmax == index, xp[_window(offset, stride, extents)], out)

    def backward(grad):
        grad_xp = np.zeros_like(xp)
        for index, offset in enumerate(offsets):
            grad_xp[_window(offset, stride, extents)] += np.where(argmax == index, grad, 0)
        return (_unpad(grad_xp, padding),)

    return record('max_pool3d', (x,), out, backward)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, momentum: float, epsilon: float) -> Tensor:
    """Per-channel normalization of [B,C,...]; updates running stats in training."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    channels = gamma.shape[0]
    if x.ndim < 2 or x.shape[1] != channels:
        raise ShapeError('batch_norm', f"input {x.shape} does not have {channels} channels")

    axes = (0,) + tuple(range(2, x.ndim))
    view = (1, channels) + (1,) * (x.ndim - 2)
    count = x.size // channels

    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mu
        unbiased = var * count / (count - 1) if count > 1 else var
        running_var *= (1.0 - momentum)
        running_var += momentum * unbiased
    else:
        mu, var = running_mean.astype(x.dtype), running_var.astype(x.dtype)

    inv_std = 1.0 / np.sqrt(var + epsilon)
    x_hat = (x.data - mu.reshape(view)) * inv_std.reshape(view)
    out = gamma.data.reshape(view) * x_hat + beta.data.reshape(view)

    def backward(grad):
        grad_gamma = (grad * x_hat).sum(axis=axes)
        grad_beta = grad.sum(axis=axes)
        grad_hat = grad * gamma.data.reshape(view)
        if training:
            grad_x = (inv_std.reshape(view) / count) * (
                count * grad_hat
                - grad_hat.sum(axis=axes).reshape(view)
                - x_hat * (grad_hat * x_hat).sum(axis=axes).reshape(view)
            )
        else:
            grad_x = grad_hat * inv_std.reshape(view)
        return grad_x, grad_gamma, grad_beta

    return record('batch_norm', (x, gamma, beta), out, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with max subtraction."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out = exps / exps.sum(axis=axis, keepdims=True)

    def backward(grad):
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)

    return record('softmax', (x,), out, backward)


def softmax_over_clips(raw_weights: Tensor) -> Tensor:
    """Column softmax across the clip axis of [N,D] (or batched [B,N,D])."""
    raw_weights = as_tensor(raw_weights)
    if raw_weights.ndim not in (2, 3):
        raise ShapeError('softmax_over_clips', f"expects [N,D] or [B,N,D], got {raw_weights.shape}")
    return softmax(raw_weights, axis=-2)
