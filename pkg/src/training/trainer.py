"""End-to-end training and evaluation of the scoring model."""
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..autodiff.tensor import GradientTape, Tensor, no_grad, precision
from ..data.video import VideoSample, prepare_clips
from ..models.bundle import AQAModel
from ..models.scoring import batch_score_loss
from ..utils.error_handler import InputError, NumericalError, SpearmanUndefinedError
from ..utils.experiment_spec import TrainConfig
from ..utils.logger import Logger
from .metrics import spearman
from .optimizer import Adam

METRICS_COLUMNS = ['epoch', 'train_loss', 'test_loss', 'test_spearman']


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_loss: float
    test_spearman: float


@dataclass
class EvalReport:
    """Predictions and correlation for one dataset, plus the training history when trained."""
    predictions: List[float]
    truths: List[float]
    spearman: float
    mean_loss: float
    sample_ids: List[str] = field(default_factory=list)
    per_epoch_history: List[EpochRecord] = field(default_factory=list)
    best_spearman: Optional[float] = None
    best_epoch: Optional[int] = None
    final_spearman: Optional[float] = None

    def to_dict(self) -> Dict:
        def clean(value):
            return None if isinstance(value, float) and math.isnan(value) else value

        return {
            'spearman': clean(self.spearman),
            'mean_loss': self.mean_loss,
            'best_spearman': clean(self.best_spearman),
            'best_epoch': self.best_epoch,
            'final_spearman': clean(self.final_spearman),
            'samples': [
                {'sample_id': sid, 'prediction': pred, 'truth': truth}
                for sid, pred, truth in zip(self.sample_ids, self.predictions, self.truths)
            ],
            'history': [
                {**record.__dict__, 'test_spearman': clean(record.test_spearman)}
                for record in self.per_epoch_history
            ],
        }


@dataclass
class TrainResult:
    model: AQAModel
    report: EvalReport
    best_state: Optional[Dict[str, np.ndarray]]


def sample_loss(prediction: float, truth: float) -> float:
    diff = prediction - truth
    return diff * diff + abs(diff)


def report_from_predictions(predictions: Sequence[float], truths: Sequence[float],
                            sample_ids: Sequence[str] = ()) -> EvalReport:
    """EvalReport for precomputed predictions.

    Raises:
        InputError: fewer than 2 samples or mismatched lengths
        SpearmanUndefinedError: constant predictions or truths
    """
    predictions = [float(p) for p in predictions]
    truths = [float(t) for t in truths]
    rho = spearman(predictions, truths)
    mean_loss = float(np.mean([sample_loss(p, t) for p, t in zip(predictions, truths)]))
    return EvalReport(predictions=predictions, truths=truths, spearman=rho, mean_loss=mean_loss,
                      sample_ids=list(sample_ids))


def write_metrics_csv(history: Sequence[EpochRecord], path: Union[str, Path]) -> Path:
    """epoch,train_loss,test_loss,test_spearman; undefined correlations are written as nan."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([record.__dict__ for record in history], columns=METRICS_COLUMNS)
    frame.to_csv(path, index=False, na_rep='nan', float_format='%.10g')
    return path


class Trainer:
    """Runs the crop -> transform -> partition -> features -> aggregate -> score pipeline."""

    def __init__(self, config: TrainConfig, logger: Optional[logging.Logger] = None,
                 progress: bool = False, threads: int = 1):
        """Initialize trainer.

        Args:
            config: Optimization settings
            logger: Logger instance
            progress: Show per-batch progress bars on stderr
            threads: Worker threads for evaluation
        """
        self.config = config
        self.logger = logger or Logger.get_logger(__name__)
        self.progress = progress
        self.threads = max(1, int(threads))

    def _forward(self, model: AQAModel, sample: VideoSample, rng: Optional[np.random.Generator],
                 train: bool) -> Tensor:
        dtype = np.float32 if self.config.precision == 32 else np.float64
        batch = prepare_clips(sample, model.config.clip_len, rng, train, dtype=dtype)
        return model(Tensor(batch.clips), sample.difficulty).final

    def _predict(self, model: AQAModel, sample: VideoSample) -> float:
        with precision(self.config.precision), no_grad():
            return self._forward(model, sample, None, train=False).item()

    def predict(self, model: AQAModel, dataset: Sequence[VideoSample]) -> List[float]:
        """Deterministic eval-mode final scores in dataset order."""
        model.eval()
        batches = [dataset[i:i + self.config.eval_batch]
                   for i in range(0, len(dataset), self.config.eval_batch)]
        predictions = []
        for batch in tqdm(batches, desc='eval', disable=not self.progress, file=sys.stderr, leave=False):
            if self.threads > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    predictions.extend(pool.map(lambda s: self._predict(model, s), batch))
            else:
                predictions.extend(self._predict(model, s) for s in batch)
        return predictions

    def evaluate(self, model: AQAModel, dataset: Sequence[VideoSample]) -> EvalReport:
        """Evaluate a model.

        Raises:
            InputError: fewer than 2 samples
            SpearmanUndefinedError: constant predictions
        """
        if len(dataset) < 2:
            raise InputError(f"evaluation needs at least 2 samples, got {len(dataset)}")
        predictions = self.predict(model, dataset)
        return report_from_predictions(predictions, [s.true_score for s in dataset],
                                       [s.sample_id for s in dataset])

    def _evaluate_epoch(self, model: AQAModel, dataset: Sequence[VideoSample]) -> EvalReport:
        """Like evaluate, but an undefined correlation is recorded as nan."""
        predictions = self.predict(model, dataset)
        truths = [s.true_score for s in dataset]
        try:
            return report_from_predictions(predictions, truths, [s.sample_id for s in dataset])
        except SpearmanUndefinedError:
            losses = [sample_loss(p, t) for p, t in zip(predictions, truths)]
            return EvalReport(predictions=predictions, truths=truths, spearman=float('nan'),
                              mean_loss=float(np.mean(losses)), sample_ids=[s.sample_id for s in dataset])

    def train(self, model: AQAModel, train_set: Sequence[VideoSample],
              test_set: Sequence[VideoSample]) -> TrainResult:
        """Train end-to-end with two Adam groups, keeping the best-by-test-Spearman state.

        Args:
            model: Model built under the configured precision
            train_set: Training samples (non-empty)
            test_set: Held-out samples (at least 2)

        Returns:
            TrainResult with the model holding the best state

        Raises:
            NumericalError: a batch loss is not finite
        """
        if not train_set:
            raise InputError("training set is empty")
        if len(test_set) < 2:
            raise InputError(f"test set needs at least 2 samples, got {len(test_set)}")

        cfg = self.config
        optimizer = Adam(model.param_groups(), {'backbone': cfg.lr_backbone, 'fresh': cfg.lr_fresh},
                         betas=cfg.betas, eps=cfg.eps)
        shuffle_rng = np.random.default_rng([cfg.seed, 0])

        history: List[EpochRecord] = []
        best_report: Optional[EvalReport] = None
        best_state = None
        best_epoch = None

        with precision(cfg.precision):
            for epoch in range(1, cfg.epochs + 1):
                started = time.monotonic()
                model.train()
                order = shuffle_rng.permutation(len(train_set))
                batches = [order[i:i + cfg.train_batch] for i in range(0, len(order), cfg.train_batch)]

                total_loss = 0.0
                bar = tqdm(batches, desc=f"epoch {epoch}", disable=not self.progress,
                           file=sys.stderr, leave=False)
                for batch_index, batch in enumerate(bar, start=1):
                    optimizer.zero_grad()
                    with GradientTape() as tape:
                        preds = []
                        for index in batch:
                            rng = np.random.default_rng([cfg.seed, epoch, int(index)])
                            preds.append(self._forward(model, train_set[index], rng, train=True))
                        loss = batch_score_loss(preds, [train_set[i].true_score for i in batch])
                    value = loss.item()
                    if not math.isfinite(value):
                        raise NumericalError(epoch, batch_index, value)
                    tape.backward(loss)
                    optimizer.step()
                    total_loss += value * len(batch)
                    bar.set_postfix(loss=f"{value:.4f}")

                train_loss = total_loss / len(train_set)
                epoch_report = self._evaluate_epoch(model, test_set)
                record = EpochRecord(epoch, train_loss, epoch_report.mean_loss, epoch_report.spearman)
                history.append(record)
                self.logger.info(
                    f"Epoch {epoch}/{cfg.epochs}: train_loss={train_loss:.4f} "
                    f"test_loss={record.test_loss:.4f} test_spearman={record.test_spearman:.4f} "
                    f"({time.monotonic() - started:.1f}s)"
                )

                rho = epoch_report.spearman
                if not math.isnan(rho) and (best_report is None or rho > best_report.spearman):
                    best_report, best_state, best_epoch = epoch_report, model.state_dict(), epoch

        final_spearman = history[-1].test_spearman
        if best_state is not None:
            model.load_state_dict(best_state)
            report = best_report
        else:
            self.logger.warning("Test correlation was undefined at every epoch; keeping the final state")
            report = epoch_report
        report.per_epoch_history = history
        report.best_spearman = best_report.spearman if best_report else float('nan')
        report.best_epoch = best_epoch
        report.final_spearman = final_spearman
        return TrainResult(model=model, report=report, best_state=best_state)


def train(model: AQAModel, train_set: Sequence[VideoSample], test_set: Sequence[VideoSample],
          config: TrainConfig, **kwargs) -> TrainResult:
    return Trainer(config, **kwargs).train(model, train_set, test_set)


def evaluate(model: AQAModel, dataset: Sequence[VideoSample], eval_batch: int = 5,
             precision_bits: int = 64, **kwargs) -> EvalReport:
    config = TrainConfig(eval_batch=eval_batch, precision=precision_bits)
    return Trainer(config, **kwargs).evaluate(model, dataset)
