"""Adam with bias correction and named parameter groups."""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..nn import Parameter
from ..utils.error_handler import ShapeError


@dataclass
class AdamState:
    """Step count and first/second moment accumulators, one pair per parameter."""
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place.

    Args:
        params: Parameter arrays (updated in place)
        grads: Gradients, same shapes as params
        state: Moments from previous steps; empty on the first call
        lr: Step size
        betas: Decay rates of the first and second moments
        eps: Denominator floor

    Returns:
        The updated state (the same object)

    Raises:
        ShapeError: params, grads and state disagree
    """
    if len(params) != len(grads):
        raise ShapeError('adam_step', f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ShapeError('adam_step', f"state tracks {len(state.m)} parameters, got {len(params)}")

    beta1, beta2 = betas
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    step_size = lr / bc1

    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError('adam_step', f"parameter {list(p.shape)} vs gradient {list(g.shape)}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= step_size * m / (np.sqrt(v / bc2) + eps)
    return state


class Adam:
    """Adam over named groups of parameters, each with its own learning rate.

    A group whose learning rate is 0 is left bitwise unchanged.
    """

    def __init__(self, groups: Dict[str, Sequence[Parameter]], lrs: Dict[str, float],
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        missing = set(groups) - set(lrs)
        if missing:
            raise ValueError(f"no learning rate for groups {sorted(missing)}")
        self.groups = {name: list(params) for name, params in groups.items()}
        self.lrs = dict(lrs)
        self.betas = betas
        self.eps = eps
        self.states = {name: AdamState() for name in self.groups}

    def step(self):
        for name, params in self.groups.items():
            lr = self.lrs[name]
            if lr == 0 or not params:
                continue
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
            adam_step([p.data for p in params], grads, self.states[name], lr, self.betas, self.eps)

    def zero_grad(self):
        for params in self.groups.values():
            for p in params:
                p.zero_grad()
