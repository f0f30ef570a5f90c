"""Spearman's rank correlation."""
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from ..utils.error_handler import InputError, SpearmanUndefinedError


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    return rankdata(np.asarray(values, dtype=np.float64), method='average')


def spearman(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Rank correlation of two equal-length sequences.

    Tie-free inputs use 1 - 6*sum(d^2) / (n(n^2 - 1)); with ties the result is
    the Pearson correlation of the average-rank vectors.

    Raises:
        InputError: lengths differ or fewer than 2 values
        SpearmanUndefinedError: either rank vector is constant
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.size != truth.size:
        raise InputError(f"spearman needs equal lengths, got {pred.size} and {truth.size}")
    n = pred.size
    if n < 2:
        raise InputError(f"spearman needs at least 2 values, got {n}")

    pred_ranks = average_ranks(pred)
    truth_ranks = average_ranks(truth)
    pred_centered = pred_ranks - pred_ranks.mean()
    truth_centered = truth_ranks - truth_ranks.mean()
    pred_ss = float(pred_centered @ pred_centered)
    truth_ss = float(truth_centered @ truth_centered)
    if pred_ss == 0.0 or truth_ss == 0.0:
        raise SpearmanUndefinedError("spearman is undefined when one argument has zero rank variance")

    tie_free = np.unique(pred).size == n and np.unique(truth).size == n
    if tie_free:
        d = pred_ranks - truth_ranks
        return float(1.0 - 6.0 * float(d @ d) / (n * (n * n - 1)))
    return float(pred_centered @ truth_centered / np.sqrt(pred_ss * truth_ss))
