"""Experiment matrices: one trained model per (backbone, aggregation) row."""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from ..autodiff.tensor import precision
from ..data.video import VideoSample
from ..models.backbone import BackboneConfig, count_parameters
from ..models.bundle import build_model
from ..utils.error_handler import ClipScoreError, ConfigurationError
from ..utils.experiment_spec import MatrixRow, TrainConfig
from ..utils.logger import Logger
from .trainer import Trainer

MATRIX_COLUMNS = ['depth', 'conv_type', 'clip_len', 'aggregation', 'spearman', 'params']
FAILED = 'failed'

# Presets mirroring the two comparison layouts: depth x conv type, and clip length
DEPTH_LAYOUT = [
    MatrixRow(depth, conv_type, 8, aggregation)
    for depth in ('tiny',)
    for conv_type in ('conv3d', 'conv2plus1d')
    for aggregation in ('average', 'weight_decider')
]
CLIP_LAYOUT = [
    MatrixRow('tiny', 'conv2plus1d', clip_len, aggregation)
    for clip_len in (8, 16, 32)
    for aggregation in ('average', 'weight_decider')
]
LAYOUTS = {'depth': DEPTH_LAYOUT, 'clip': CLIP_LAYOUT}


@dataclass
class MatrixResult:
    depth: str
    conv_type: str
    clip_len: int
    aggregation: str
    spearman: Union[float, str]
    params: Union[int, str]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def as_row(self) -> dict:
        return {column: getattr(self, column) for column in MATRIX_COLUMNS}


def run_experiment_matrix(rows: Sequence[MatrixRow], train_set: Sequence[VideoSample],
                          test_set: Sequence[VideoSample], config: TrainConfig,
                          logger: Optional[logging.Logger] = None, progress: bool = False,
                          threads: int = 1, wd_init: str = 'uniform') -> List[MatrixResult]:
    """Train and evaluate every row; a failing row is marked failed and the matrix continues.

    Args:
        rows: Backbone/aggregation combinations
        train_set: Training samples shared by every row
        test_set: Held-out samples shared by every row
        config: Optimization settings shared by every row
        logger: Logger instance
        progress: Show progress bars
        threads: Evaluation worker threads
        wd_init: Weight-Decider initialization for weight_decider rows

    Returns:
        One result per row, in row order
    """
    if not rows:
        raise ConfigurationError("experiment matrix needs at least one row")
    logger = logger or Logger.get_logger(__name__)
    trainer = Trainer(config, logger=logger, progress=progress, threads=threads)

    results = []
    for index, row in enumerate(rows, start=1):
        label = f"{row.depth}/{row.conv_type}/n={row.clip_len}/{row.aggregation}"
        logger.info(f"Matrix row {index}/{len(rows)}: {label}")
        try:
            with precision(config.precision):
                backbone_config = BackboneConfig(depth=row.depth, conv_type=row.conv_type, clip_len=row.clip_len)
                model = build_model(backbone_config, row.aggregation, seed=config.seed, wd_init=wd_init)
                params = count_parameters(model)
                outcome = trainer.train(model, train_set, test_set)
            rho = outcome.report.best_spearman
            undefined = math.isnan(rho)
            results.append(MatrixResult(row.depth, row.conv_type, row.clip_len, row.aggregation,
                                        FAILED if undefined else rho, params,
                                        'correlation undefined' if undefined else None))
            logger.info(f"Matrix row {label}: spearman={rho:.4f} params={params}")
        except (ClipScoreError, MemoryError, ArithmeticError, ValueError) as e:
            logger.error(f"Matrix row {label} failed: {e}")
            results.append(MatrixResult(row.depth, row.conv_type, row.clip_len, row.aggregation,
                                        FAILED, FAILED, str(e)))
    return results


def write_matrix_csv(results: Sequence[MatrixResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.as_row() for r in results], columns=MATRIX_COLUMNS)
    frame.to_csv(path, index=False, float_format='%.10g')
    return path


def read_matrix_csv(path: Union[str, Path]) -> List[MatrixResult]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = set(MATRIX_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigurationError(f"{path}: matrix CSV lacks columns {sorted(missing)}")

    results = []
    for record in frame.to_dict('records'):
        failed = record['spearman'] == FAILED
        results.append(MatrixResult(
            depth=record['depth'],
            conv_type=record['conv_type'],
            clip_len=int(record['clip_len']),
            aggregation=record['aggregation'],
            spearman=FAILED if failed else float(record['spearman']),
            params=record['params'] if record['params'] == FAILED else int(record['params']),
            error='failed' if failed else None,
        ))
    return results
