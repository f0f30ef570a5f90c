
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.autodiff import ops
from src.autodiff.tensor import Tensor, no_grad
from src.models.backbone import (
    BackboneConfig,
    BasicBlock,
    build_backbone,
    count_parameters,
    extract_clip_feature,
    load_config,
)
from src.nn import FullyConnected
from src.utils.error_handler import ConfigurationError, ShapeError


class TestConfig:
    def test_depth_presets(self):
        config = BackboneConfig('34')
        assert config.block_kind == 'basic'
        assert config.block_counts == [3, 4, 6, 3]
        assert config.head_units == [256, 128]
        assert config.feature_width == 512

        config = BackboneConfig('50')
        assert config.block_kind == 'bottleneck'
        assert config.head_units == [512, 256, 128]
        assert config.feature_width == 2048

        assert BackboneConfig('101').block_counts == [3, 4, 23, 3]

        tiny = BackboneConfig('tiny')
        assert tiny.block_counts == [1, 1, 1, 1]
        assert tiny.head_units == [256, 128]

    def test_numeric_depth_is_accepted(self):
        assert BackboneConfig(depth=34).depth == '34'

    @pytest.mark.parametrize('kwargs', [
        {'depth': '18'},
        {'conv_type': 'conv2d'},
        {'clip_len': 12},
        {'head_units': [256, 64]},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            BackboneConfig(**kwargs)

    def test_stride_schedule_and_temporal_extents(self):
        config = BackboneConfig('tiny', clip_len=8)
        assert config.stride_schedule()[0] == (1, 2, 2)
        assert config.temporal_extents() == [8, 8, 8, 4, 2, 1]
        assert BackboneConfig('tiny', clip_len=32).temporal_extents()[-1] == 4

    def test_load_config_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError):
            load_config({'depth': 'tiny', 'width': 3})

    def test_only_deepest_factorized_is_flagged(self):
        assert BackboneConfig('101', 'conv2plus1d').flagged
        assert not BackboneConfig('101', 'conv3d').flagged
        assert not BackboneConfig('50', 'conv2plus1d').flagged


class TestTinyBackbone:
    @pytest.mark.parametrize('conv_type', ['conv3d', 'conv2plus1d'])
    def test_clip_feature_shape(self, conv_type, rng):
        model = build_backbone(BackboneConfig('tiny', conv_type, 8), seed=0)
        with no_grad():
            out = extract_clip_feature(model, Tensor(rng.uniform(0, 1, (1, 3, 8, 112, 112))))
        assert out.shape == [1, 128]

    def test_trace_matches_forward(self, rng):
        model = build_backbone(BackboneConfig('tiny', 'conv3d', 16), seed=0)
        trace = dict(model.trace_shapes([2, 3, 16, 112, 112]))
        assert trace['stem'] == [2, 4, 16, 28, 28]
        assert trace['stages.3.0'] == [2, 32, 2, 4, 4]
        assert trace['pool'] == [2, 32]
        with no_grad():
            assert model(Tensor(rng.uniform(0, 1, (2, 3, 16, 112, 112)))).shape == trace['head.1']

    def test_same_seed_same_parameters(self):
        config = BackboneConfig('tiny', 'conv2plus1d', 8)
        first = build_backbone(config, seed=3).state_dict()
        second = build_backbone(config, seed=3).state_dict()
        assert list(first) == list(second)
        for name in first:
            assert_array_equal(first[name], second[name])

    def test_different_seed_different_parameters(self):
        config = BackboneConfig('tiny')
        first = build_backbone(config, seed=0).state_dict()
        second = build_backbone(config, seed=1).state_dict()
        assert not np.array_equal(first['stem.conv.weight'], second['stem.conv.weight'])

    def test_zero_final_head_layer_gives_zero_features(self):
        model = build_backbone(BackboneConfig('tiny'), seed=0)
        model.head.layers[-1].zero_()
        with no_grad():
            out = extract_clip_feature(model, Tensor(np.zeros((1, 3, 8, 112, 112))))
        assert_array_equal(out.data, np.zeros((1, 128)))

    @pytest.mark.parametrize('shape', [(1, 3, 16, 112, 112), (1, 3, 8, 96, 96), (3, 8, 112, 112)])
    def test_wrong_clip_geometry(self, shape):
        model = build_backbone(BackboneConfig('tiny', clip_len=8), seed=0)
        with pytest.raises(ShapeError):
            extract_clip_feature(model, Tensor(np.zeros(shape)))

    def test_parameter_names(self):
        names = dict(build_backbone(BackboneConfig('tiny'), seed=0).named_parameters())
        assert {'stem.conv.weight', 'stages.2.0.conv1.weight', 'head.layers.0.weight'} <= set(names)


class TestBasicBlock:
    @pytest.mark.parametrize('conv_type', ['conv3d', 'conv2plus1d'])
    @pytest.mark.parametrize('in_channels,planes,stride', [(4, 4, (1, 1, 1)), (4, 8, (2, 2, 2))])
    def test_zero_convolutions_reduce_to_shortcut(self, conv_type, in_channels, planes, stride, rng):
        block = BasicBlock(conv_type, in_channels, planes, stride, np.random.default_rng(0))
        for name, param in block.named_parameters():
            if name.startswith('conv') and name.endswith(('weight', 'bias')):
                param.data[...] = 0.0
        block.eval()

        x = Tensor(rng.standard_normal((2, in_channels, 4, 6, 6)))
        with no_grad():
            out = block(x)
            shortcut = block.shortcut(x) if block.shortcut is not None else x
            expected = ops.relu(shortcut)
        assert (block.shortcut is None) == (stride == (1, 1, 1))
        assert_allclose(out.data, expected.data, atol=1e-12)


class TestParameterCounts:
    def test_single_fully_connected_layer(self):
        assert count_parameters(FullyConnected(2, 3)) == 9

    def test_factorized_parity_with_full(self):
        full = build_backbone(BackboneConfig('tiny', 'conv3d'), seed=0)
        factored = build_backbone(BackboneConfig('tiny', 'conv2plus1d'), seed=0)

        slack = 0
        for name, module in full.named_modules():
            if type(module).__name__ == 'Conv3DLayer':
                kt, kh, _ = module.kernel
                if (kt, kh) != (1, 1):
                    slack += kh * kh * module.in_channels + kt * module.out_channels

        difference = abs(count_parameters(factored, conv_weights_only=True)
                         - count_parameters(full, conv_weights_only=True))
        assert difference <= slack


def test_flagged_configuration_warns(monkeypatch):
    from src.models import backbone as backbone_module

    records = []
    monkeypatch.setattr(backbone_module.logger, 'warning', lambda message: records.append(message))
    monkeypatch.setattr(backbone_module, 'Backbone', lambda config, rng: None)
    build_backbone(BackboneConfig('101', 'conv2plus1d'), seed=0)
    assert records and 'not evaluated' in records[0]


@pytest.mark.slow
class TestFullDepthGeometry:
    @pytest.mark.parametrize('depth', ['34', '50'])
    @pytest.mark.parametrize('conv_type', ['conv3d', 'conv2plus1d'])
    def test_depths_trace_to_clip_features(self, depth, conv_type):
        model = build_backbone(BackboneConfig(depth, conv_type, 16), seed=0)
        trace = model.trace_shapes([16, 3, 16, 112, 112])
        assert trace[-1] == (f"head.{len(model.config.head_units) - 1}", [16, 128])
        assert trace[-len(model.config.head_units) - 1][1] == [16, model.config.feature_width]

    @pytest.mark.parametrize('clip_len', [8, 16, 32])
    def test_clip_lengths_produce_features(self, clip_len, rng):
        model = build_backbone(BackboneConfig('34', 'conv2plus1d', clip_len), seed=0)
        with no_grad():
            out = extract_clip_feature(model, Tensor(rng.uniform(0, 1, (1, 3, clip_len, 112, 112))))
        assert out.shape == [1, 128]
