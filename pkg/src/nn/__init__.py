"""Layers for clip feature extraction and aggregation."""
from .functional import batch_norm, conv3d, max_pool3d, softmax, softmax_over_clips
from .layers import (
    BatchNorm3D,
    Conv2Plus1DLayer,
    Conv3DLayer,
    FullyConnected,
    MaxPool3D,
    batchnorm_forward,
    conv2plus1d_forward,
    conv3d_forward,
    fully_connected_forward,
    global_avg_pool,
    midplanes,
)
from .module import Module, Parameter, Sequential, uniform_init

__all__ = [
    'batch_norm', 'conv3d', 'max_pool3d', 'softmax', 'softmax_over_clips',
    'BatchNorm3D', 'Conv2Plus1DLayer', 'Conv3DLayer', 'FullyConnected', 'MaxPool3D',
    'batchnorm_forward', 'conv2plus1d_forward', 'conv3d_forward', 'fully_connected_forward',
    'global_avg_pool', 'midplanes', 'Module', 'Parameter', 'Sequential', 'uniform_init',
]
