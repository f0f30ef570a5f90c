"""Residual clip feature extractors (3D or (2+1)D) with fully-connected heads."""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..nn import (
    BatchNorm3D,
    Conv2Plus1DLayer,
    Conv3DLayer,
    FullyConnected,
    MaxPool3D,
    Module,
    Sequential,
    global_avg_pool,
)
from ..utils.error_handler import ConfigurationError, ShapeError
from ..utils.logger import Logger

FEATURE_WIDTH = 128
CLIP_SIZE = 112
CLIP_LENGTHS = (8, 16, 32)
CONV_TYPES = ('conv3d', 'conv2plus1d')

# depth -> (block kind, block counts, head units, default stage channels)
DEPTH_PRESETS = {
    'tiny': ('basic', [1, 1, 1, 1], [256, 128], [4, 8, 16, 32]),
    '34': ('basic', [3, 4, 6, 3], [256, 128], [64, 128, 256, 512]),
    '50': ('bottleneck', [3, 4, 6, 3], [512, 256, 128], [64, 128, 256, 512]),
    '101': ('bottleneck', [3, 4, 23, 3], [512, 256, 128], [64, 128, 256, 512]),
}

STEM_KERNEL = (3, 7, 7)
STEM_STRIDE = (1, 2, 2)
STEM_PADDING = (1, 3, 3)
POOL_KERNEL = (1, 3, 3)
POOL_STRIDE = (1, 2, 2)
POOL_PADDING = (0, 1, 1)
STAGE_STRIDES = [(1, 1, 1), (2, 2, 2), (2, 2, 2), (2, 2, 2)]

logger = Logger.get_logger(__name__)


@dataclass
class BackboneConfig:
    """Architecture of one clip feature extractor."""
    depth: str = 'tiny'
    conv_type: str = 'conv3d'
    clip_len: int = 8
    stage_channels: List[int] = field(default_factory=list)
    block_counts: List[int] = field(default_factory=list)
    head_units: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.depth = str(self.depth)
        if self.depth not in DEPTH_PRESETS:
            raise ConfigurationError(f"depth must be one of {list(DEPTH_PRESETS)}, got {self.depth!r}")
        _, blocks, head, channels = DEPTH_PRESETS[self.depth]
        self.stage_channels = list(self.stage_channels or channels)
        self.block_counts = list(self.block_counts or blocks)
        self.head_units = list(self.head_units or head)
        self.validate()

    @property
    def block_kind(self) -> str:
        return DEPTH_PRESETS[self.depth][0]

    @property
    def expansion(self) -> int:
        return 4 if self.block_kind == 'bottleneck' else 1

    @property
    def feature_width(self) -> int:
        """Width of the global-average-pool output."""
        return self.stage_channels[-1] * self.expansion

    @property
    def flagged(self) -> bool:
        """Constructible configuration that was never evaluated at full scale."""
        return self.depth == '101' and self.conv_type == 'conv2plus1d'

    def validate(self):
        if self.conv_type not in CONV_TYPES:
            raise ConfigurationError(f"conv_type must be one of {list(CONV_TYPES)}, got {self.conv_type!r}")
        if self.clip_len not in CLIP_LENGTHS:
            raise ConfigurationError(f"clip_len must be one of {list(CLIP_LENGTHS)}, got {self.clip_len}")
        if len(self.stage_channels) != 4 or len(self.block_counts) != 4:
            raise ConfigurationError("stage_channels and block_counts need exactly 4 entries")
        if any(c < 1 for c in self.stage_channels) or any(b < 1 for b in self.block_counts):
            raise ConfigurationError("stage channels and block counts must be positive")
        if not self.head_units or self.head_units[-1] != FEATURE_WIDTH:
            raise ConfigurationError(f"last head layer must have {FEATURE_WIDTH} units, got {self.head_units}")

    def stride_schedule(self) -> List[Tuple[int, int, int]]:
        """Stem stride, pool stride and the entry stride of each stage."""
        return [STEM_STRIDE, POOL_STRIDE] + list(STAGE_STRIDES)

    def temporal_extents(self) -> List[int]:
        """Temporal length after the stem, the pool and each stage."""
        extents = []
        t = (self.clip_len + 2 * STEM_PADDING[0] - STEM_KERNEL[0]) // STEM_STRIDE[0] + 1
        extents.append(t)
        t = (t + 2 * POOL_PADDING[0] - POOL_KERNEL[0]) // POOL_STRIDE[0] + 1
        extents.append(t)
        for stride in STAGE_STRIDES:
            t = (t + 2 - 3) // stride[0] + 1
            extents.append(t)
        return extents

    def to_dict(self) -> Dict:
        return asdict(self)


def _conv(conv_type: str, in_channels: int, out_channels: int, kernel, stride, padding, rng) -> Module:
    layer = Conv2Plus1DLayer if conv_type == 'conv2plus1d' else Conv3DLayer
    return layer(in_channels, out_channels, kernel, stride, padding, bias=False, rng=rng)


class Projection(Module):
    """1x1x1 strided convolution + batch norm matching the residual branch."""

    def __init__(self, in_channels: int, out_channels: int, stride, rng):
        super().__init__()
        self.conv = Conv3DLayer(in_channels, out_channels, 1, stride, 0, bias=False, rng=rng)
        self.bn = BatchNorm3D(out_channels)

    def output_shape(self, input_shape):
        return self.conv.output_shape(input_shape)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(x))


class BasicBlock(Module):
    """Two 3x3x3 convolutions with an identity or projection shortcut."""

    expansion = 1

    def __init__(self, conv_type: str, in_channels: int, planes: int, stride, rng):
        super().__init__()
        self.conv1 = _conv(conv_type, in_channels, planes, 3, stride, 1, rng)
        self.bn1 = BatchNorm3D(planes)
        self.conv2 = _conv(conv_type, planes, planes, 3, 1, 1, rng)
        self.bn2 = BatchNorm3D(planes)
        self.shortcut = None
        if tuple(stride) != (1, 1, 1) or in_channels != planes:
            self.shortcut = Projection(in_channels, planes, stride, rng)

    def output_shape(self, input_shape):
        return self.conv2.output_shape(self.conv1.output_shape(input_shape))

    def forward(self, x: Tensor) -> Tensor:
        out = ops.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        identity = self.shortcut(x) if self.shortcut is not None else x
        return ops.relu(ops.add(out, identity))


class Bottleneck(Module):
    """1x1x1 reduce, 3x3x3, 1x1x1 expand (x4) with a shortcut."""

    expansion = 4

    def __init__(self, conv_type: str, in_channels: int, planes: int, stride, rng):
        super().__init__()
        out_channels = planes * self.expansion
        self.conv1 = Conv3DLayer(in_channels, planes, 1, 1, 0, bias=False, rng=rng)
        self.bn1 = BatchNorm3D(planes)
        self.conv2 = _conv(conv_type, planes, planes, 3, stride, 1, rng)
        self.bn2 = BatchNorm3D(planes)
        self.conv3 = Conv3DLayer(planes, out_channels, 1, 1, 0, bias=False, rng=rng)
        self.bn3 = BatchNorm3D(out_channels)
        self.shortcut = None
        if tuple(stride) != (1, 1, 1) or in_channels != out_channels:
            self.shortcut = Projection(in_channels, out_channels, stride, rng)

    def output_shape(self, input_shape):
        shape = self.conv1.output_shape(input_shape)
        return self.conv3.output_shape(self.conv2.output_shape(shape))

    def forward(self, x: Tensor) -> Tensor:
        out = ops.relu(self.bn1(self.conv1(x)))
        out = ops.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        identity = self.shortcut(x) if self.shortcut is not None else x
        return ops.relu(ops.add(out, identity))


class Stem(Module):
    def __init__(self, conv_type: str, out_channels: int, rng):
        super().__init__()
        self.conv = _conv(conv_type, 3, out_channels, STEM_KERNEL, STEM_STRIDE, STEM_PADDING, rng)
        self.bn = BatchNorm3D(out_channels)
        self.pool = MaxPool3D(POOL_KERNEL, POOL_STRIDE, POOL_PADDING)

    def output_shape(self, input_shape):
        return self.pool.output_shape(self.conv.output_shape(input_shape))

    def forward(self, x: Tensor) -> Tensor:
        return self.pool(ops.relu(self.bn(self.conv(x))))


class Head(Module):
    """Fully-connected stack with relu between layers and none after the last."""

    def __init__(self, in_features: int, units: Sequence[int], rng):
        super().__init__()
        widths = [in_features] + list(units)
        self.layers = Sequential(*[
            FullyConnected(widths[i], widths[i + 1], rng=rng) for i in range(len(units))
        ])

    def forward(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index < last:
                x = ops.relu(x)
        return x


class Backbone(Module):
    """stem -> 4 residual stages -> global average pool -> head, producing 128-d clip features."""

    def __init__(self, config: BackboneConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        block = Bottleneck if config.block_kind == 'bottleneck' else BasicBlock

        self.stem = Stem(config.conv_type, config.stage_channels[0], rng)
        in_channels = config.stage_channels[0]
        stages = []
        for planes, count, stride in zip(config.stage_channels, config.block_counts, STAGE_STRIDES):
            blocks = []
            for index in range(count):
                blocks.append(block(config.conv_type, in_channels, planes,
                                    stride if index == 0 else (1, 1, 1), rng))
                in_channels = planes * block.expansion
            stages.append(Sequential(*blocks))
        self.stages = Sequential(*stages)
        self.head = Head(in_channels, config.head_units, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = self.stages(self.stem(x))
        return self.head(global_avg_pool(x))

    def trace_shapes(self, input_shape: Sequence[int]) -> List[Tuple[str, List[int]]]:
        """Output geometry of the stem, every block, the pool and the head, without computing.

        Raises:
            GeometryError: some layer would have a non-positive output extent
        """
        shape = self.stem.output_shape(list(input_shape))
        trace = [('stem', shape)]
        for stage_index, stage in enumerate(self.stages):
            for block_index, block in enumerate(stage):
                shape = block.output_shape(shape)
                trace.append((f"stages.{stage_index}.{block_index}", shape))
        shape = shape[:2]
        trace.append(('pool', shape))
        for index, layer in enumerate(self.head.layers):
            shape = [shape[0], layer.out_features]
            trace.append((f"head.{index}", shape))
        return trace


def build_backbone(config: BackboneConfig, seed: int) -> Backbone:
    """Build a backbone with parameters drawn deterministically from ``seed``.

    Args:
        config: Architecture description
        seed: Initialization seed

    Returns:
        Backbone whose parameters are identical for identical (config, seed)

    Raises:
        ConfigurationError: invalid depth, conv type or clip length
    """
    config.validate()
    if config.flagged:
        logger.warning(f"Backbone depth {config.depth} with {config.conv_type} was not evaluated at full scale")
    extents = config.temporal_extents()
    if min(extents) < 1:
        raise ConfigurationError(f"clip_len {config.clip_len} collapses to temporal extents {extents}")
    return Backbone(config, np.random.default_rng(seed))


def extract_clip_feature(model: Backbone, clip: Tensor) -> Tensor:
    """Map clips [B,3,n,112,112] to features [B,128].

    Raises:
        ShapeError: clip length or spatial size does not match the backbone
    """
    clip = ops.as_tensor(clip)
    expected = [3, model.config.clip_len, CLIP_SIZE, CLIP_SIZE]
    if clip.ndim != 5 or clip.shape[1:] != expected:
        raise ShapeError('extract_clip_feature', f"expects [B, {', '.join(map(str, expected))}], got {clip.shape}")
    return model(clip)


def count_parameters(model: Module, conv_weights_only: bool = False) -> int:
    """Trainable scalar count; optionally convolution weights only."""
    if not conv_weights_only:
        return sum(param.size for param in model.parameters())
    return sum(module.weight.size for _, module in model.named_modules() if isinstance(module, Conv3DLayer))


def load_config(data: Optional[Dict]) -> BackboneConfig:
    """BackboneConfig from a manifest or spec dictionary."""
    data = dict(data or {})
    unknown = set(data) - set(BackboneConfig.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"unknown backbone keys: {sorted(unknown)}")
    return BackboneConfig(**data)
