"""Clip-to-video feature aggregation: plain averaging and the Weight-Decider."""
from typing import Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..nn import FullyConnected, Module, softmax_over_clips
from ..utils.error_handler import ConfigurationError, ShapeError
from .backbone import FEATURE_WIDTH

AGGREGATIONS = ('average', 'weight_decider')
WD_WIDTHS = [FEATURE_WIDTH, 64, 32, 64, FEATURE_WIDTH]
WD_INITS = ('uniform', 'zero-output')


class WeightDecider(Module):
    """128 -> 64 -> 32 -> 64 -> 128 MLP proposing per-clip, per-element raw weights."""

    def __init__(self, rng: Optional[np.random.Generator] = None, init: str = 'uniform'):
        super().__init__()
        if init not in WD_INITS:
            raise ConfigurationError(f"wd_init must be one of {list(WD_INITS)}, got {init!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.fc1 = FullyConnected(WD_WIDTHS[0], WD_WIDTHS[1], rng=rng)
        self.fc2 = FullyConnected(WD_WIDTHS[1], WD_WIDTHS[2], rng=rng)
        self.fc3 = FullyConnected(WD_WIDTHS[2], WD_WIDTHS[3], rng=rng)
        self.fc4 = FullyConnected(WD_WIDTHS[3], WD_WIDTHS[4], rng=rng)
        if init == 'zero-output':
            self.fc4.zero_()

    def forward(self, features: Tensor) -> Tensor:
        x = ops.relu(self.fc1(features))
        x = ops.relu(self.fc2(x))
        x = ops.relu(self.fc3(x))
        return self.fc4(x)


def _check_features(op: str, features: Tensor) -> Tensor:
    features = ops.as_tensor(features)
    if features.ndim != 2 or features.shape[1] != FEATURE_WIDTH:
        raise ShapeError(op, f"expects clip features [N, {FEATURE_WIDTH}], got {features.shape}")
    return features


def aggregate_average(features: Tensor) -> Tensor:
    """Elementwise mean over the clip axis: [N,128] -> [128]."""
    features = ops.as_tensor(features)
    if features.ndim != 2:
        raise ShapeError('aggregate_average', f"expects [N, D], got {features.shape}")
    return ops.mean(features, axis=0)


def weight_decider_forward(wd: WeightDecider, features: Tensor) -> Tensor:
    """Raw (pre-softmax) weight vectors, one row per clip."""
    return wd(_check_features('weight_decider_forward', features))


def aggregate_weighted(features: Tensor, wd: WeightDecider) -> Tensor:
    """sum_i f_i * w_i with w = column softmax of the Weight-Decider output."""
    features = _check_features('aggregate_weighted', features)
    weights = softmax_over_clips(weight_decider_forward(wd, features))
    return ops.sum(ops.mul(features, weights), axis=0)


def aggregate(kind: str, features: Tensor, wd: Optional[WeightDecider] = None) -> Tensor:
    """Dispatch to the averaging or Weight-Decider aggregator.

    Raises:
        ConfigurationError: unknown kind, or weight_decider without a network
    """
    if kind == 'average':
        return aggregate_average(features)
    if kind == 'weight_decider':
        if wd is None:
            raise ConfigurationError("weight_decider aggregation needs a WeightDecider")
        return aggregate_weighted(features, wd)
    raise ConfigurationError(f"aggregation kind must be one of {list(AGGREGATIONS)}, got {kind!r}")
