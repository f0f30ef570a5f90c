"""Trainable layers: 3D and (2+1)D convolution, batch norm, fully connected, pooling."""
from typing import Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..utils.error_handler import ShapeError
from . import functional as F
from .module import Module, Parameter, uniform_init


def midplanes(in_channels: int, out_channels: int, t: int, d: int) -> int:
    """Intermediate channels of a (2+1)D layer matching a t x d x d 3D layer's weights.

    M = floor(t*d^2*in*out / (d^2*in + t*out)), clamped to at least 1.
    """
    numerator = t * d * d * in_channels * out_channels
    denominator = d * d * in_channels + t * out_channels
    return max(1, numerator // denominator)


class Conv3DLayer(Module):
    """3D cross-correlation with zero padding."""

    def __init__(self, in_channels: int, out_channels: int, kernel, stride=1, padding=0,
                 bias: bool = True, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = F.triple(kernel)
        self.stride = F.triple(stride)
        self.padding = F.triple(padding)

        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * int(np.prod(self.kernel))
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels) + self.kernel, fan_in))
        self.bias = Parameter(uniform_init(rng, (out_channels,), fan_in)) if bias else None

    def output_shape(self, input_shape: Sequence[int]) -> list:
        batch, channels = input_shape[:2]
        if channels != self.in_channels:
            raise ShapeError('conv3d', f"input has {channels} channels, layer expects {self.in_channels}")
        extents = F.output_geometry('conv3d', input_shape[2:], self.kernel, self.stride, self.padding)
        return [batch, self.out_channels, *extents]

    def conv_weight_count(self) -> int:
        return self.weight.size

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm3D(Module):
    """Per-channel batch normalization with running statistics."""

    def __init__(self, channels: int, momentum: float = 0.1, epsilon: float = 1e-5):
        super().__init__()
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must be in (0, 1), got {momentum}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {epsilon}")
        self.channels = channels
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.register_buffer('running_mean', np.zeros(channels, dtype=self.gamma.dtype))
        self.register_buffer('running_var', np.ones(channels, dtype=self.gamma.dtype))

    def output_shape(self, input_shape: Sequence[int]) -> list:
        if input_shape[1] != self.channels:
            raise ShapeError('batch_norm', f"input has {input_shape[1]} channels, layer expects {self.channels}")
        return list(input_shape)

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            self.training, self.momentum, self.epsilon)


class Conv2Plus1DLayer(Module):
    """Spatial (1 x d x d) convolution, batch norm, relu, temporal (t x 1 x 1) convolution."""

    def __init__(self, in_channels: int, out_channels: int, kernel, stride=1, padding=0,
                 bias: bool = True, rng: Optional[np.random.Generator] = None):
        super().__init__()
        kt, kh, kw = F.triple(kernel)
        st, sh, sw = F.triple(stride)
        pt, ph, pw = F.triple(padding)
        if kh != kw:
            raise ShapeError('conv2plus1d', f"spatial kernel must be square, got {kh}x{kw}")

        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = (kt, kh, kw)
        self.mid_channels = midplanes(in_channels, out_channels, kt, kh)

        rng = rng if rng is not None else np.random.default_rng(0)
        self.spatial = Conv3DLayer(in_channels, self.mid_channels, (1, kh, kw), (1, sh, sw),
                                   (0, ph, pw), bias=bias, rng=rng)
        self.norm = BatchNorm3D(self.mid_channels)
        self.temporal = Conv3DLayer(self.mid_channels, out_channels, (kt, 1, 1), (st, 1, 1),
                                    (pt, 0, 0), bias=bias, rng=rng)

    def output_shape(self, input_shape: Sequence[int]) -> list:
        return self.temporal.output_shape(self.spatial.output_shape(input_shape))

    def conv_weight_count(self) -> int:
        return self.spatial.conv_weight_count() + self.temporal.conv_weight_count()

    def forward(self, x: Tensor) -> Tensor:
        return self.temporal(ops.relu(self.norm(self.spatial(x))))


class FullyConnected(Module):
    """output = input @ weights^T + bias for [B, in] inputs."""

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None,
                 zero: bool = False):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        if zero:
            self.weight = Parameter(np.zeros((out_features, in_features)))
            self.bias = Parameter(np.zeros(out_features))
        else:
            self.weight = Parameter(uniform_init(rng, (out_features, in_features), in_features))
            self.bias = Parameter(uniform_init(rng, (out_features,), in_features))

    def zero_(self):
        self.weight.data[...] = 0.0
        self.bias.data[...] = 0.0

    def forward(self, x: Tensor) -> Tensor:
        x = ops.as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError('fully_connected', f"expects [B, {self.in_features}], got {x.shape}")
        return ops.add_bias(ops.matmul(x, ops.transpose(self.weight)), self.bias, axis=1)


class MaxPool3D(Module):
    def __init__(self, kernel, stride=None, padding=0):
        super().__init__()
        self.kernel = F.triple(kernel)
        self.stride = self.kernel if stride is None else F.triple(stride)
        self.padding = F.triple(padding)

    def output_shape(self, input_shape: Sequence[int]) -> list:
        extents = F.output_geometry('max_pool3d', input_shape[2:], self.kernel, self.stride, self.padding)
        return [*input_shape[:2], *extents]

    def forward(self, x: Tensor) -> Tensor:
        return F.max_pool3d(x, self.kernel, self.stride, self.padding)


def global_avg_pool(x: Tensor) -> Tensor:
    """Average over T, H, W: [B,C,T,H,W] -> [B,C]."""
    x = ops.as_tensor(x)
    if x.ndim != 5:
        raise ShapeError('global_avg_pool', f"expects 5-d input, got {x.shape}")
    return ops.mean(x, axis=(2, 3, 4))


def fully_connected_forward(layer: FullyConnected, x: Tensor) -> Tensor:
    return layer(x)


def conv3d_forward(layer: Conv3DLayer, x: Tensor) -> Tensor:
    return layer(x)


def conv2plus1d_forward(layer: Conv2Plus1DLayer, x: Tensor) -> Tensor:
    return layer(x)


def batchnorm_forward(bn: BatchNorm3D, x: Tensor) -> Tensor:
    return bn(x)
