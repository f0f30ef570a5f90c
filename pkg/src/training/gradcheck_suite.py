"""Finite-difference checks of every primitive, layer and the end-to-end tiny pipeline."""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..autodiff import ops
from ..autodiff.gradcheck import absolute_error, finite_diff_grad, inject_backward_fault, relative_error
from ..autodiff.tensor import GradientTape, Tensor, precision
from ..models.aggregation import WeightDecider, aggregate_weighted
from ..models.backbone import BackboneConfig, build_backbone, extract_clip_feature
from ..models.scoring import LinearRegressor, predict_score, score_loss
from ..nn import (
    BatchNorm3D,
    Conv2Plus1DLayer,
    Conv3DLayer,
    FullyConnected,
    global_avg_pool,
    max_pool3d,
    softmax_over_clips,
)
from ..utils.error_handler import GradientCheckError
from ..utils.logger import Logger

# Names under which primitives record themselves on the tape
RECORDED_OPS = (
    'add', 'sub', 'mul', 'scalar_mul', 'matmul', 'relu', 'abs', 'square', 'sum', 'mean',
    'reshape', 'transpose', 'concat', 'add_bias', 'softmax', 'conv3d', 'max_pool3d', 'batch_norm',
)


@dataclass
class CheckResult:
    """Worst relative error over the inputs that differ by more than atol."""
    name: str
    rel_error: float
    tolerance: float
    abs_error: float = 0.0

    @property
    def passed(self) -> bool:
        return self.rel_error < self.tolerance


class GradientChecker:
    """Compares tape gradients with central differences, one named check at a time."""

    def __init__(self, tolerance: float = 1e-4, eps: float = 1e-5, seed: int = 0,
                 pipeline_coordinates: int = 12, atol: float = 1e-7,
                 logger: Optional[logging.Logger] = None):
        """Initialize checker.

        Args:
            tolerance: Maximum accepted relative error (exclusive)
            eps: Finite-difference step
            seed: Seed for random operands
            pipeline_coordinates: Coordinates sampled per tensor in the end-to-end check
            atol: Inputs whose analytic and numeric gradients differ by less than this agree,
                whatever their relative error (gradients that vanish identically)
            logger: Logger instance
        """
        self.tolerance = tolerance
        self.eps = eps
        self.seed = seed
        self.pipeline_coordinates = pipeline_coordinates
        self.atol = atol
        self.logger = logger or Logger.get_logger(__name__)
        self.rng = np.random.default_rng(seed)

    def _leaf(self, *shape, scale: float = 1.0) -> Tensor:
        return Tensor(self.rng.standard_normal(shape) * scale, requires_grad=True)

    def _projected(self, out: Tensor) -> Tensor:
        """Scalar sum(out * R) with a fixed random R, so every output element matters."""
        weights = np.random.default_rng([self.seed, out.size]).standard_normal(out.data.shape)
        return ops.sum(ops.mul(out, Tensor(weights)))

    def check(self, name: str, f: Callable[[], Tensor], inputs: Sequence[Tensor],
              coordinates: Optional[int] = None) -> CheckResult:
        """Check d f / d input for every input.

        Args:
            name: Check name (usually the operation)
            f: Closure returning a scalar tensor of ``inputs``
            inputs: Leaves to differentiate
            coordinates: Sample this many flat coordinates per input instead of all
        """
        for x in inputs:
            x.zero_grad()
        with GradientTape() as tape:
            out = f()
        tape.backward(out)

        worst, worst_abs = 0.0, 0.0
        for x in inputs:
            indices = None
            if coordinates is not None and coordinates < x.size:
                indices = np.sort(self.rng.choice(x.size, size=coordinates, replace=False))
            numeric = finite_diff_grad(lambda _: f(), x, self.eps, indices, freeze_branches=True)
            analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
            if indices is not None:
                analytic = analytic.reshape(-1)[indices]
                numeric = numeric.reshape(-1)[indices]
            difference = absolute_error(analytic, numeric)
            worst_abs = max(worst_abs, difference)
            if difference >= self.atol:
                worst = max(worst, relative_error(analytic, numeric))

        result = CheckResult(name, worst, self.tolerance, worst_abs)
        log = self.logger.info if result.passed else self.logger.error
        log(f"gradcheck {name}: max rel. error {worst:.3e}, max abs. error {worst_abs:.3e} "
            f"({'pass' if result.passed else 'FAIL'})")
        return result

    def primitive_checks(self) -> List[CheckResult]:
        a, b = self._leaf(3, 4), self._leaf(3, 4)
        m, n = self._leaf(3, 5), self._leaf(5, 2)
        v, bias = self._leaf(2, 3, 4), self._leaf(3)
        c = self._leaf(2, 4)
        p = self._projected
        return [
            self.check('add', lambda: p(ops.add(a, b)), [a, b]),
            self.check('sub', lambda: p(ops.sub(a, b)), [a, b]),
            self.check('mul', lambda: p(ops.mul(a, b)), [a, b]),
            self.check('scalar_mul', lambda: p(ops.scalar_mul(a, -2.5)), [a]),
            self.check('matmul', lambda: p(ops.matmul(m, n)), [m, n]),
            self.check('relu', lambda: p(ops.relu(a)), [a]),
            self.check('absolute', lambda: p(ops.absolute(a)), [a]),
            self.check('square', lambda: p(ops.square(a)), [a]),
            self.check('sum', lambda: p(ops.sum(v, axis=(0, 2))), [v]),
            self.check('mean', lambda: p(ops.mean(v, axis=1)), [v]),
            self.check('reshape', lambda: p(ops.reshape(v, [6, 4])), [v]),
            self.check('transpose', lambda: p(ops.transpose(v, (2, 0, 1))), [v]),
            self.check('concat', lambda: p(ops.concat([a, c], axis=0)), [a, c]),
            self.check('add_bias', lambda: p(ops.add_bias(v, bias, axis=1)), [v, bias]),
            self.check('softmax', lambda: p(softmax_over_clips(a)), [a]),
        ]

    def layer_checks(self) -> List[CheckResult]:
        layer_rng = np.random.default_rng([self.seed, 1])
        p = self._projected

        conv = Conv3DLayer(2, 3, 3, 1, 1, rng=layer_rng)
        x = self._leaf(1, 2, 4, 6, 6)

        factored = Conv2Plus1DLayer(2, 3, 3, (1, 2, 2), 1, rng=layer_rng)
        y = self._leaf(2, 2, 3, 5, 5)

        bn = BatchNorm3D(3)
        bn.gamma.data[...] = layer_rng.uniform(0.5, 1.5, 3)
        bn.beta.data[...] = layer_rng.standard_normal(3)
        z = self._leaf(2, 3, 2, 2, 2)

        fc = FullyConnected(5, 4, rng=layer_rng)
        u = self._leaf(3, 5)
        w = self._leaf(2, 3, 3, 4, 4)

        return [
            self.check('conv3d', lambda: p(conv(x)), [x, conv.weight, conv.bias]),
            self.check('conv2plus1d', lambda: p(factored(y)), [y] + factored.parameters()),
            self.check('batch_norm', lambda: p(bn(z)), [z, bn.gamma, bn.beta]),
            self.check('max_pool3d', lambda: p(max_pool3d(w, (1, 3, 3), (1, 2, 2), (0, 1, 1))), [w]),
            self.check('fully_connected', lambda: p(fc(u)), [u, fc.weight, fc.bias]),
            self.check('global_avg_pool', lambda: p(global_avg_pool(w)), [w]),
        ]

    def aggregation_checks(self) -> List[CheckResult]:
        wd = WeightDecider(np.random.default_rng([self.seed, 2]))
        features = self._leaf(6, 128)
        regressor = LinearRegressor(np.random.default_rng([self.seed, 3]))
        pred = self._leaf(1, scale=5.0)
        return [
            self.check('weight_decider_aggregation',
                       lambda: self._projected(aggregate_weighted(features, wd)),
                       [features, wd.fc1.weight, wd.fc2.bias, wd.fc4.weight, wd.fc4.bias]),
            self.check('predict_score',
                       lambda: predict_score(regressor, ops.sum(features, axis=0), 2.5).final,
                       [features, regressor.w, regressor.b]),
            self.check('score_loss', lambda: score_loss(pred, 1.25), [pred]),
        ]

    def pipeline_check(self) -> CheckResult:
        """Tiny backbone -> Weight-Decider -> regressor -> loss, w.r.t. input and parameters."""
        backbone = build_backbone(BackboneConfig('tiny', 'conv3d', 8), seed=self.seed)
        wd = WeightDecider(np.random.default_rng([self.seed, 4]))
        regressor = LinearRegressor(np.random.default_rng([self.seed, 5]))
        clips = self._leaf(2, 3, 8, 112, 112, scale=0.5)

        def loss():
            features = extract_clip_feature(backbone, clips)
            prediction = predict_score(regressor, aggregate_weighted(features, wd), 3.0)
            return score_loss(prediction.final, 40.0)

        params = dict(backbone.named_parameters())
        inputs = [
            clips,
            params['stem.conv.weight'],
            params['stages.2.0.conv1.weight'],
            params['head.layers.0.weight'],
            wd.fc1.weight,
            regressor.w,
        ]
        return self.check('pipeline', loss, inputs, coordinates=self.pipeline_coordinates)

    def run(self, include_pipeline: bool = True, fault: Optional[str] = None) -> List[CheckResult]:
        """Run every check at 64-bit, optionally with one backward rule corrupted."""
        with precision(64):
            if fault is not None:
                self.logger.warning(f"Corrupting the backward rule of '{fault}'")
                with inject_backward_fault(fault):
                    return self._run_all(include_pipeline)
            return self._run_all(include_pipeline)

    def _run_all(self, include_pipeline: bool) -> List[CheckResult]:
        results = self.primitive_checks() + self.layer_checks() + self.aggregation_checks()
        if include_pipeline:
            results.append(self.pipeline_check())
        return results


def summarize(results: Sequence[CheckResult]) -> Dict[str, float]:
    return {r.name: r.rel_error for r in results}


def raise_on_failure(results: Sequence[CheckResult]):
    """Raise GradientCheckError naming every failing check."""
    failures = [r for r in results if not r.passed]
    if failures:
        worst = max(failures, key=lambda r: r.rel_error)
        raise GradientCheckError(", ".join(r.name for r in failures), worst.rel_error, worst.tolerance)
