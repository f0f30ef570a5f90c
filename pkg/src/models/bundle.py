"""The full scoring model (backbone + aggregation + regressor) and its checkpoint format.

A checkpoint is a plain-text manifest followed by AQAT tensor records::

    AQACKPT 1
    config {"aggregation": ..., "backbone": {...}, "wd_init": ...}
    strides [[1, 2, 2], ...]
    temporal [8, 8, 8, 4, 2, 1]
    tensors <count>
    <name> <d0>x<d1>x...
    ---
    <AQAT record> * count

Records appear in manifest order.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..autodiff.serialization import decode_array, encode_array
from ..autodiff.tensor import Tensor
from ..nn import Module, Parameter
from ..utils.error_handler import ConfigurationError, FormatError
from ..utils.logger import Logger
from .aggregation import AGGREGATIONS, WeightDecider, aggregate
from .backbone import BackboneConfig, Backbone, build_backbone, extract_clip_feature, load_config
from .scoring import LinearRegressor, ScorePrediction, predict_score

CHECKPOINT_HEADER = 'AQACKPT 1'
MANIFEST_END = b'\n---\n'

logger = Logger.get_logger(__name__)


class AQAModel(Module):
    """Clips of one video -> clip features -> video feature -> difficulty-scaled score."""

    def __init__(self, backbone: Backbone, aggregation: str, regressor: LinearRegressor,
                 wd: Optional[WeightDecider] = None, wd_init: str = 'uniform'):
        super().__init__()
        if aggregation not in AGGREGATIONS:
            raise ConfigurationError(f"aggregation must be one of {list(AGGREGATIONS)}, got {aggregation!r}")
        if (aggregation == 'weight_decider') != (wd is not None):
            raise ConfigurationError("a WeightDecider is required exactly for weight_decider aggregation")
        self.aggregation = aggregation
        self.wd_init = wd_init
        self.backbone = backbone
        if wd is not None:
            self.wd = wd
        self.regressor = regressor

    @property
    def config(self) -> BackboneConfig:
        return self.backbone.config

    def weight_decider(self) -> Optional[WeightDecider]:
        return self._modules.get('wd')

    def forward(self, clips: Tensor, difficulty: float) -> ScorePrediction:
        """Score one video given its clips [N,3,n,112,112]."""
        features = extract_clip_feature(self.backbone, clips)
        f_video = aggregate(self.aggregation, features, self.weight_decider())
        return predict_score(self.regressor, f_video, difficulty)

    def param_groups(self) -> Dict[str, List[Parameter]]:
        """Backbone parameters and the freshly initialized ones (Weight-Decider + regressor)."""
        fresh = []
        if self.weight_decider() is not None:
            fresh.extend(self.wd.parameters())
        fresh.extend(self.regressor.parameters())
        return {'backbone': self.backbone.parameters(), 'fresh': fresh}

    def describe(self) -> Dict:
        return {
            'aggregation': self.aggregation,
            'backbone': self.config.to_dict(),
            'wd_init': self.wd_init,
        }


def build_model(backbone_config: BackboneConfig, aggregation: str, seed: int,
                wd_init: str = 'uniform') -> AQAModel:
    """Deterministically initialized model; each component draws from its own sub-seed."""
    backbone = build_backbone(backbone_config, seed)
    wd = None
    if aggregation == 'weight_decider':
        wd = WeightDecider(np.random.default_rng([seed, 1]), init=wd_init)
    regressor = LinearRegressor(np.random.default_rng([seed, 2]))
    return AQAModel(backbone, aggregation, regressor, wd=wd, wd_init=wd_init)


@dataclass
class CheckpointManifest:
    config: Dict
    strides: List[List[int]]
    temporal: List[int]
    tensors: List[Tuple[str, List[int]]]

    def render(self) -> str:
        lines = [
            CHECKPOINT_HEADER,
            'config ' + json.dumps(self.config, sort_keys=True),
            'strides ' + json.dumps(self.strides),
            'temporal ' + json.dumps(self.temporal),
            f'tensors {len(self.tensors)}',
        ]
        lines.extend(f"{name} {'x'.join(str(d) for d in shape)}" for name, shape in self.tensors)
        return '\n'.join(lines)

    @classmethod
    def parse(cls, text: str) -> 'CheckpointManifest':
        lines = text.split('\n')
        if not lines or lines[0] != CHECKPOINT_HEADER:
            raise FormatError("bad checkpoint header", 0)
        fields = {}
        for line in lines[1:5]:
            key, _, value = line.partition(' ')
            fields[key] = value
        try:
            config = json.loads(fields['config'])
            strides = json.loads(fields['strides'])
            temporal = json.loads(fields['temporal'])
            count = int(fields['tensors'])
            tensors = []
            for line in lines[5:5 + count]:
                name, dims = line.rsplit(' ', 1)
                tensors.append((name, [int(d) for d in dims.split('x')]))
        except (KeyError, ValueError) as e:
            raise FormatError(f"malformed checkpoint manifest: {e}", 0) from e
        if len(tensors) != count:
            raise FormatError(f"manifest lists {len(tensors)} of {count} tensors", 0)
        return cls(config=config, strides=strides, temporal=temporal, tensors=tensors)


def save_checkpoint(model: AQAModel, path: Union[str, Path]) -> CheckpointManifest:
    """Write manifest + AQAT records; returns the manifest written."""
    state = model.state_dict()
    manifest = CheckpointManifest(
        config=model.describe(),
        strides=[list(s) for s in model.config.stride_schedule()],
        temporal=model.config.temporal_extents(),
        tensors=[(name, list(array.shape)) for name, array in state.items()],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(manifest.render().encode('utf-8'))
        f.write(MANIFEST_END)
        for array in state.values():
            f.write(encode_array(array))
    logger.info(f"Checkpoint written to {path} ({len(state)} tensors)")
    return manifest


def read_manifest(buffer: bytes) -> Tuple[CheckpointManifest, int]:
    end = buffer.find(MANIFEST_END)
    if end < 0:
        raise FormatError("checkpoint manifest terminator not found", len(buffer))
    try:
        text = buffer[:end].decode('utf-8')
    except UnicodeDecodeError as e:
        raise FormatError("checkpoint manifest is not UTF-8", e.start) from e
    return CheckpointManifest.parse(text), end + len(MANIFEST_END)


def load_checkpoint(path: Union[str, Path]) -> Tuple[AQAModel, CheckpointManifest]:
    """Rebuild the model described by the manifest and load its tensors.

    Raises:
        FormatError: malformed manifest or tensor records
        ConfigurationError: records do not match the model the manifest describes
    """
    buffer = Path(path).read_bytes()
    manifest, offset = read_manifest(buffer)

    config = manifest.config
    model = build_model(load_config(config.get('backbone')), config.get('aggregation', 'average'),
                        seed=0, wd_init=config.get('wd_init', 'uniform'))

    state = {}
    for name, shape in manifest.tensors:
        start = offset
        array, offset = decode_array(buffer, offset)
        if list(array.shape) != shape:
            raise FormatError(f"tensor {name} has shape {list(array.shape)}, manifest says {shape}", start)
        state[name] = array
    if offset != len(buffer):
        raise FormatError(f"{len(buffer) - offset} trailing bytes after the last tensor", offset)

    model.load_state_dict(state)
    return model, manifest


def check_compatible(manifest: CheckpointManifest, backbone_config: BackboneConfig, aggregation: str):
    """Raise ConfigurationError when a checkpoint does not fit the experiment spec."""
    saved = manifest.config.get('backbone', {})
    for key in ('depth', 'conv_type', 'clip_len'):
        if str(saved.get(key)) != str(getattr(backbone_config, key)):
            raise ConfigurationError(
                f"checkpoint {key} {saved.get(key)!r} does not match spec {getattr(backbone_config, key)!r}"
            )
    if manifest.config.get('aggregation') != aggregation:
        raise ConfigurationError(
            f"checkpoint aggregation {manifest.config.get('aggregation')!r} does not match spec {aggregation!r}"
        )
