"""Minimal reverse-mode automatic differentiation over numpy arrays."""
from .tensor import (
    GradientTape,
    Tensor,
    backward,
    get_default_dtype,
    no_grad,
    precision,
    set_default_dtype,
    tensor_of,
)
from . import ops
from .gradcheck import finite_diff_grad, inject_backward_fault, relative_error

__all__ = [
    'GradientTape', 'Tensor', 'backward', 'get_default_dtype', 'no_grad', 'precision',
    'set_default_dtype', 'tensor_of', 'ops', 'finite_diff_grad', 'inject_backward_fault',
    'relative_error',
]
