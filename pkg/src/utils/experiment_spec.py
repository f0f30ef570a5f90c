"""Experiment spec documents (JSON).

Sections and defaults::

    {
      "name": "default",
      "backbone":    {"depth": "tiny", "conv_type": "conv3d", "clip_len": 8},
      "aggregation": {"kind": "weight_decider", "wd_init": "uniform"},
      "train":       {"epochs": 50, "lr_backbone": 1e-5, "lr_fresh": 1e-4,
                      "train_batch": 2, "eval_batch": 5, "betas": [0.9, 0.999],
                      "eps": 1e-8, "seed": 0, "precision": 64},
      "data":        {"train_path": null, "test_path": null,
                      "synth": {"train_count": 120, "test_count": 40, "seed": 0,
                                "frame_size": [128, 171], "frames": 103},
                      "matrix": []},
      "output":      {"directory": "runs/default"}
    }

Unknown keys anywhere are rejected. ``data`` uses the AQAD files when both
paths are given, otherwise the ``synth`` block.
"""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .error_handler import ConfigurationError


def _build(cls, data: Optional[Dict[str, Any]], section: str):
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigurationError(f"section '{section}' must be an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown keys in '{section}': {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigurationError(f"invalid '{section}' section: {e}") from e


@dataclass
class BackboneSection:
    depth: str = 'tiny'
    conv_type: str = 'conv3d'
    clip_len: int = 8
    stage_channels: List[int] = field(default_factory=list)
    block_counts: List[int] = field(default_factory=list)
    head_units: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.depth = str(self.depth)


@dataclass
class AggregationSection:
    kind: str = 'weight_decider'
    wd_init: str = 'uniform'

    def __post_init__(self):
        if self.kind not in ('average', 'weight_decider'):
            raise ConfigurationError(f"aggregation.kind must be 'average' or 'weight_decider', got {self.kind!r}")
        if self.wd_init not in ('uniform', 'zero-output'):
            raise ConfigurationError(f"aggregation.wd_init must be 'uniform' or 'zero-output', got {self.wd_init!r}")


@dataclass
class TrainConfig:
    """Optimization settings for one training run."""
    epochs: int = 50
    lr_backbone: float = 1e-5
    lr_fresh: float = 1e-4
    train_batch: int = 2
    eval_batch: int = 5
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    precision: int = 64

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if self.epochs < 1:
            raise ConfigurationError(f"train.epochs must be >= 1, got {self.epochs}")
        if self.lr_backbone < 0 or self.lr_fresh < 0:
            raise ConfigurationError("learning rates must be >= 0")
        if self.train_batch < 1 or self.eval_batch < 1:
            raise ConfigurationError("batch sizes must be >= 1")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigurationError(f"train.betas must be two values in [0, 1), got {list(self.betas)}")
        if self.eps <= 0:
            raise ConfigurationError(f"train.eps must be > 0, got {self.eps}")
        if self.precision not in (32, 64):
            raise ConfigurationError(f"train.precision must be 32 or 64, got {self.precision}")


@dataclass
class SynthSection:
    train_count: int = 120
    test_count: int = 40
    seed: int = 0
    frame_size: List[int] = field(default_factory=lambda: [128, 171])
    frames: int = 103

    def __post_init__(self):
        if self.train_count < 1 or self.test_count < 2:
            raise ConfigurationError("synth needs train_count >= 1 and test_count >= 2")
        if len(self.frame_size) != 2:
            raise ConfigurationError(f"synth.frame_size must be [H, W], got {self.frame_size}")
        if self.frames < 96:
            raise ConfigurationError(f"synth.frames must be >= 96, got {self.frames}")


@dataclass
class MatrixRow:
    depth: str = 'tiny'
    conv_type: str = 'conv3d'
    clip_len: int = 8
    aggregation: str = 'average'

    def __post_init__(self):
        self.depth = str(self.depth)


@dataclass
class DataSection:
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    synth: Optional[SynthSection] = None
    matrix: List[MatrixRow] = field(default_factory=list)

    def __post_init__(self):
        if (self.train_path is None) != (self.test_path is None):
            raise ConfigurationError("data.train_path and data.test_path must be given together")
        if isinstance(self.synth, dict) or self.synth is None:
            self.synth = _build(SynthSection, self.synth, 'data.synth')
        self.matrix = [
            row if isinstance(row, MatrixRow) else _build(MatrixRow, row, 'data.matrix[]')
            for row in self.matrix
        ]

    @property
    def uses_files(self) -> bool:
        return self.train_path is not None


@dataclass
class OutputSection:
    directory: str = 'runs/default'


@dataclass
class ExperimentSpec:
    name: str = 'default'
    backbone: BackboneSection = field(default_factory=BackboneSection)
    aggregation: AggregationSection = field(default_factory=AggregationSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataSection = field(default_factory=DataSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> 'ExperimentSpec':
        if not isinstance(document, dict):
            raise ConfigurationError("experiment spec must be a JSON object")
        unknown = sorted(set(document) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigurationError(f"unknown top-level keys: {unknown}")
        return cls(
            name=str(document.get('name', 'default')),
            backbone=_build(BackboneSection, document.get('backbone'), 'backbone'),
            aggregation=_build(AggregationSection, document.get('aggregation'), 'aggregation'),
            train=_build(TrainConfig, document.get('train'), 'train'),
            data=_build(DataSection, document.get('data'), 'data'),
            output=_build(OutputSection, document.get('output'), 'output'),
        )

    def to_dict(self) -> Dict[str, Any]:
        document = asdict(self)
        document['train']['betas'] = list(self.train.betas)
        return document


def load_experiment_spec(path: Union[str, Path, None]) -> ExperimentSpec:
    """Parse a spec file; ``None`` gives the all-defaults spec.

    Raises:
        FileNotFoundError: path does not exist
        ConfigurationError: invalid JSON, unknown keys or out-of-range values
    """
    if path is None:
        return ExperimentSpec.from_dict({})
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    return ExperimentSpec.from_dict(document)
