import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.autodiff.tensor import Tensor
from src.models.aggregation import (
    WeightDecider,
    aggregate,
    aggregate_average,
    aggregate_weighted,
    weight_decider_forward,
)
from src.nn import softmax_over_clips
from src.utils.error_handler import ConfigurationError, ShapeError


def features(rng, n):
    return Tensor(rng.standard_normal((n, 128)))


class FixedRawWeights(WeightDecider):
    def __init__(self, raw):
        super().__init__()
        self.raw = raw

    def forward(self, features):
        return Tensor(self.raw)


def numpy_weighted(f, wd):
    """Direct sum over clips with a plain-numpy Weight-Decider."""
    x = f
    layers = [wd.fc1, wd.fc2, wd.fc3, wd.fc4]
    for index, layer in enumerate(layers):
        x = x @ layer.weight.data.T + layer.bias.data
        if index < len(layers) - 1:
            x = np.maximum(x, 0.0)
    weights = np.exp(x - x.max(axis=0))
    weights /= weights.sum(axis=0)
    return sum(f[i] * weights[i] for i in range(f.shape[0]))


class TestAverage:
    def test_two_rows(self):
        f = np.zeros((2, 128))
        f[0, 0], f[1, 0], f[1, 1] = 1.0, 3.0, 4.0
        out = aggregate_average(Tensor(f)).data
        assert_array_equal(out[:2], [2.0, 2.0])

    def test_single_row_is_identity(self, rng):
        f = features(rng, 1)
        assert_array_equal(aggregate_average(f).data, f.data[0])

    def test_definition(self, rng):
        f = features(rng, 5)
        assert_allclose(aggregate_average(f).data, f.data.sum(axis=0) / 5, atol=1e-12)


class TestWeightDecider:
    def test_zero_network_gives_zero_raw_weights(self, rng):
        wd = WeightDecider(rng)
        for layer in (wd.fc1, wd.fc2, wd.fc3, wd.fc4):
            layer.zero_()
        assert_array_equal(weight_decider_forward(wd, features(rng, 4)).data, np.zeros((4, 128)))

    def test_identical_rows_identical_weights(self, rng):
        row = rng.standard_normal(128)
        raw = weight_decider_forward(WeightDecider(rng), Tensor(np.stack([row, row]))).data
        assert_array_equal(raw[0], raw[1])

    def test_layer_widths(self):
        wd = WeightDecider()
        assert [layer.out_features for layer in (wd.fc1, wd.fc2, wd.fc3, wd.fc4)] == [64, 32, 64, 128]

    def test_zero_output_init(self):
        wd = WeightDecider(init='zero-output')
        assert not np.any(wd.fc4.weight.data)
        assert np.any(wd.fc1.weight.data)

    def test_unknown_init(self):
        with pytest.raises(ConfigurationError):
            WeightDecider(init='xavier')

    def test_rejects_wrong_width(self):
        with pytest.raises(ShapeError):
            weight_decider_forward(WeightDecider(), Tensor(np.ones((3, 64))))


class TestWeightedAggregation:
    def test_zero_output_layer_reduces_to_mean(self, rng):
        wd = WeightDecider(rng)
        wd.fc4.zero_()
        f = features(rng, 6)
        assert_allclose(aggregate_weighted(f, wd).data, aggregate_average(f).data, atol=1e-12)

    @pytest.mark.parametrize('n', [3, 6, 12])
    def test_reduction_to_mean_on_random_sets(self, n):
        rng = np.random.default_rng(n)
        wd = WeightDecider(rng, init='zero-output')
        for _ in range(100):
            f = features(rng, n)
            assert_allclose(aggregate_weighted(f, wd).data, aggregate_average(f).data, atol=1e-9)

    def test_saturated_weights_select_a_row(self, rng):
        raw = np.zeros((2, 128))
        raw[0] = 1000.0
        f = features(rng, 2)
        assert_allclose(aggregate_weighted(f, FixedRawWeights(raw)).data, f.data[0])

    def test_matches_direct_summation(self, rng):
        wd = WeightDecider(rng)
        f = features(rng, 3)
        assert_allclose(aggregate_weighted(f, wd).data, numpy_weighted(f.data, wd), atol=1e-10)

    def test_convex_hull_and_column_stochastic(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            raw = Tensor(rng.normal(0.0, 3.0, (n, 128)))
            weights = softmax_over_clips(raw).data
            assert_allclose(weights.sum(axis=0), np.ones(128), atol=1e-9)
            assert np.all(weights >= 0.0)

            f = rng.standard_normal((n, 128))
            out = aggregate_weighted(Tensor(f), FixedRawWeights(raw.data)).data
            assert np.all(out >= f.min(axis=0) - 1e-9)
            assert np.all(out <= f.max(axis=0) + 1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(11)
        wd = WeightDecider(rng)
        for _ in range(100):
            n = int(rng.integers(2, 13))
            f = rng.standard_normal((n, 128))
            order = rng.permutation(n)
            assert_allclose(aggregate_weighted(Tensor(f[order]), wd).data,
                            aggregate_weighted(Tensor(f), wd).data, atol=1e-9)
            assert_allclose(aggregate_average(Tensor(f[order])).data,
                            aggregate_average(Tensor(f)).data, atol=1e-9)


class TestDispatch:
    def test_average(self, rng):
        f = features(rng, 3)
        assert_array_equal(aggregate('average', f).data, aggregate_average(f).data)

    def test_weight_decider(self, rng):
        f, wd = features(rng, 3), WeightDecider(rng)
        assert_array_equal(aggregate('weight_decider', f, wd).data, aggregate_weighted(f, wd).data)

    def test_weight_decider_without_network(self, rng):
        with pytest.raises(ConfigurationError):
            aggregate('weight_decider', features(rng, 3), None)

    def test_unknown_kind(self, rng):
        with pytest.raises(ConfigurationError):
            aggregate('max', features(rng, 3))
