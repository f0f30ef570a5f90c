"""Central-difference gradient oracle."""
from contextlib import contextmanager, nullcontext
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor, _backward_faults, frozen_branches, no_grad


def finite_diff_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5,
                     indices: Optional[Sequence[int]] = None,
                     freeze_branches: bool = False) -> np.ndarray:
    """Estimate d f / d x by central differences.

    ``f`` is evaluated with ``x`` perturbed in place, one flat coordinate at a
    time, and must be deterministic. With ``freeze_branches`` the relu masks,
    pooling argmax and signs of the unperturbed pass are replayed at x +- eps,
    so a kink lying within eps of the point does not bias the estimate.

    Args:
        f: Function of x returning a scalar tensor
        x: Point of evaluation (restored on exit)
        eps: Perturbation size (> 0)
        indices: Flat coordinates to estimate; all coordinates when None
        freeze_branches: Differentiate the smooth piece active at x

    Returns:
        Array shaped like x; coordinates outside ``indices`` are 0
    """
    flat = x.data.reshape(-1)
    estimate = np.zeros(flat.size, dtype=np.float64)
    coords = range(flat.size) if indices is None else indices

    with no_grad(), (frozen_branches() if freeze_branches else nullcontext()) as branches:
        def evaluate() -> float:
            if branches is not None:
                branches.rewind()
            return f(x).item()

        if branches is not None:
            f(x)

        for k in coords:
            original = flat[k]
            flat[k] = original + eps
            plus = evaluate()
            flat[k] = original - eps
            minus = evaluate()
            flat[k] = original
            estimate[k] = (plus - minus) / (2.0 * eps)

    return estimate.reshape(x.data.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(max|a|, max|n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(absolute_error(analytic, numeric) / scale)


def absolute_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n|."""
    difference = np.asarray(analytic, dtype=np.float64) - np.asarray(numeric, dtype=np.float64)
    return float(np.abs(difference).max(initial=0.0))


@contextmanager
def inject_backward_fault(op_name: str, scale: float = 1.5):
    """Corrupt the backward rule of one primitive while the context is open."""
    _backward_faults[op_name] = lambda grad: grad * scale
    try:
        yield
    finally:
        _backward_faults.pop(op_name, None)
