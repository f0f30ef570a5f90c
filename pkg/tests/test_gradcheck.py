import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.autodiff import ops
from src.autodiff.gradcheck import absolute_error, finite_diff_grad, inject_backward_fault, relative_error
from src.autodiff.tensor import Tensor, backward
from src.nn import max_pool3d, softmax_over_clips
from src.training.gradcheck_suite import GradientChecker, raise_on_failure, summarize
from src.utils.error_handler import GradientCheckError


def test_finite_difference_of_square():
    x = Tensor([3.0], requires_grad=True)
    estimate = finite_diff_grad(lambda t: ops.sum(ops.square(t)), x, eps=1e-4)
    assert_allclose(estimate, [6.0], atol=1e-6)


def test_finite_difference_of_sum_is_ones(rng):
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    estimate = finite_diff_grad(ops.sum, x)
    assert_allclose(estimate, np.ones((3, 4)), atol=1e-9)


def test_finite_difference_restores_input(rng):
    values = rng.standard_normal(5)
    x = Tensor(values.copy(), requires_grad=True)
    finite_diff_grad(lambda t: ops.sum(ops.square(t)), x)
    np.testing.assert_array_equal(x.data, values)


def test_sampled_coordinates_only():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    estimate = finite_diff_grad(lambda t: ops.sum(ops.square(t)), x, indices=[2])
    assert_allclose(estimate, [0.0, 0.0, 6.0], atol=1e-6)


def test_relative_error():
    assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert relative_error(np.array([2.0]), np.array([1.0])) == pytest.approx(0.5)


def test_absolute_error():
    assert absolute_error(np.array([1.0, 2.0]), np.array([1.5, 2.0])) == pytest.approx(0.5)
    assert absolute_error(np.zeros(1), np.array([4e-11])) == pytest.approx(4e-11)


class TestFrozenBranches:
    def test_relu_kink_within_eps(self):
        # x[0] sits 3e-6 above the kink; +-1e-5 lands on both sides of it
        x = Tensor([3e-6, -0.5, 2.0], requires_grad=True)
        f = lambda t: ops.sum(ops.relu(t))

        crossing = finite_diff_grad(f, x)
        assert crossing[0] == pytest.approx(0.65, abs=1e-6)

        frozen = finite_diff_grad(f, x, freeze_branches=True)
        assert_allclose(frozen, [1.0, 0.0, 1.0], atol=1e-9)

    def test_abs_kink_within_eps(self):
        x = Tensor([-2e-6, 1.0], requires_grad=True)
        frozen = finite_diff_grad(lambda t: ops.sum(ops.absolute(t)), x, freeze_branches=True)
        assert_allclose(frozen, [-1.0, 1.0], atol=1e-9)

    def test_max_pool_tie_within_eps(self):
        values = np.zeros((1, 1, 1, 1, 2))
        values[..., 0] = 1.0
        values[..., 1] = 1.0 - 4e-6
        x = Tensor(values, requires_grad=True)
        frozen = finite_diff_grad(lambda t: ops.sum(max_pool3d(t, (1, 1, 2))), x, freeze_branches=True)
        assert_allclose(frozen.reshape(-1), [1.0, 0.0], atol=1e-9)

    def test_input_is_restored(self, rng):
        values = rng.standard_normal(6)
        x = Tensor(values.copy(), requires_grad=True)
        finite_diff_grad(lambda t: ops.sum(ops.relu(t)), x, freeze_branches=True)
        np.testing.assert_array_equal(x.data, values)


def test_fault_injection_scales_one_rule():
    x = Tensor([1.0, -2.0], requires_grad=True)
    with inject_backward_fault('square', scale=2.0):
        backward(ops.sum(ops.square(x)))
    assert_allclose(x.grad, [4.0, -8.0])

    x.zero_grad()
    backward(ops.sum(ops.square(x)))
    assert_allclose(x.grad, [2.0, -4.0])


SEEDS = [0, 1, 2, 3, 4]


class TestGradientChecker:
    @pytest.mark.parametrize('seed', SEEDS)
    def test_primitives_pass(self, seed):
        results = GradientChecker(seed=seed).primitive_checks()
        assert all(r.passed for r in results), summarize(results)

    @pytest.mark.parametrize('seed', SEEDS)
    def test_layers_pass(self, seed):
        results = GradientChecker(seed=seed).layer_checks()
        names = {r.name for r in results}
        assert {'conv3d', 'conv2plus1d', 'batch_norm', 'fully_connected'} <= names
        assert all(r.passed for r in results), summarize(results)

    @pytest.mark.parametrize('seed', SEEDS)
    def test_aggregation_passes(self, seed):
        results = GradientChecker(seed=seed).aggregation_checks()
        assert all(r.passed for r in results), summarize(results)

    def test_bias_before_column_softmax(self, rng):
        # per-column shifts cancel in the softmax across clips: d/d bias is identically 0
        x = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
        bias = Tensor(rng.standard_normal(4), requires_grad=True)
        weights = Tensor(rng.standard_normal((6, 4)))

        def f():
            return ops.sum(ops.mul(softmax_over_clips(ops.add_bias(x, bias, axis=1)), weights))

        result = GradientChecker(seed=0).check('column_softmax_bias', f, [x, bias])
        assert result.passed, result
        assert result.abs_error < 1e-7
        assert_allclose(bias.grad, np.zeros(4), atol=1e-12)

    def test_kink_within_eps_passes(self):
        x = Tensor([3e-6, -0.5, 2.0, -1e-6], requires_grad=True)
        result = GradientChecker(seed=0).check('relu_near_kink', lambda: ops.sum(ops.relu(x)), [x])
        assert result.passed, result

    def test_corrupted_rule_is_named(self):
        results = GradientChecker(seed=0).run(include_pipeline=False, fault='matmul')
        failing = {r.name for r in results if not r.passed}
        assert 'matmul' in failing
        assert 'add' not in failing
        with pytest.raises(GradientCheckError) as info:
            raise_on_failure(results)
        assert 'matmul' in info.value.op

    def test_zero_tolerance_fails(self):
        results = GradientChecker(tolerance=0.0, seed=0).primitive_checks()
        assert not any(r.passed for r in results)

    @pytest.mark.slow
    def test_end_to_end_pipeline(self):
        result = GradientChecker(seed=0, pipeline_coordinates=6).pipeline_check()
        assert result.passed, result.rel_error
