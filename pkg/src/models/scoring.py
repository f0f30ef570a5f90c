"""Score regression and the training loss."""
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..nn import Module, Parameter, uniform_init
from ..utils.error_handler import InputError, ShapeError
from .backbone import FEATURE_WIDTH

Number = Union[float, int]


class LinearRegressor(Module):
    """raw = w . f + b over the 128-d video feature."""

    def __init__(self, rng: Optional[np.random.Generator] = None, width: int = FEATURE_WIDTH):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w = Parameter(uniform_init(rng, (width,), width))
        self.b = Parameter(np.zeros(1))

    def forward(self, f_video: Tensor) -> Tensor:
        f_video = ops.as_tensor(f_video)
        if f_video.shape != self.w.shape:
            raise ShapeError('linear_regressor', f"expects a {self.w.shape[0]}-d video feature, got {f_video.shape}")
        return ops.add(ops.sum(ops.mul(f_video, self.w)), self.b)


@dataclass
class ScorePrediction:
    """Regressor output and its difficulty-scaled final score."""
    raw: Tensor
    final: Tensor
    difficulty_degree: float

    @property
    def raw_score(self) -> float:
        return self.raw.item()

    @property
    def final_score(self) -> float:
        return self.final.item()


def predict_score(reg: LinearRegressor, f_video: Tensor, difficulty: Number) -> ScorePrediction:
    """final = (w . f + b) * difficulty.

    Raises:
        InputError: difficulty is not positive
    """
    difficulty = float(difficulty)
    if not difficulty > 0:
        raise InputError(f"difficulty degree must be > 0, got {difficulty}")
    raw = reg(f_video)
    return ScorePrediction(raw=raw, final=ops.scalar_mul(raw, difficulty), difficulty_degree=difficulty)


def score_loss(pred: Union[Tensor, Number], truth: Number) -> Tensor:
    """(pred - truth)^2 + |pred - truth|, with subgradient 0 at the kink."""
    diff = ops.sub(ops.as_tensor(pred), float(truth))
    return ops.add(ops.square(diff), ops.absolute(diff))


def batch_score_loss(preds: Sequence[Tensor], truths: Sequence[Number]) -> Tensor:
    """Mean of per-sample losses."""
    if len(preds) != len(truths) or not preds:
        raise InputError(f"need matching non-empty predictions and truths, got {len(preds)} and {len(truths)}")
    losses = [score_loss(pred, truth) for pred, truth in zip(preds, truths)]
    return ops.scalar_mul(ops.sum(ops.concat(losses, axis=0)), 1.0 / len(losses))
